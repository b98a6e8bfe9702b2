//! Experiment configuration: a JSON object with a fixed schema. Parsing
//! collects every violation instead of stopping at the first one.

use std::path::Path;
use std::str::FromStr;

use num_complex::Complex;
use num_rational::BigRational;
use serde_json::{json, Map, Value};

use hermitian_einstein::bundle::BundleSpec;
use hermitian_einstein::quot::poly::{format_ratio, GaussRational};

use crate::report::{float, rational};

#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    /// Malformed JSON, with 1-based line and column.
    Parse { line: usize, column: usize, message: String },
    /// Field path and message for every schema violation.
    Schema(Vec<String>),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read config: {e}"),
            ConfigError::Parse { line, column, message } => {
                write!(f, "config is not valid JSON (line {line}, column {column}): {message}")
            }
            ConfigError::Schema(list) => {
                writeln!(f, "config has {} problem(s):", list.len())?;
                for item in list {
                    writeln!(f, "  {item}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq)]
pub enum MetricChoice {
    Standard,
    /// FS metric of exp(A) at the given level, A random hermitian with
    /// entries of size `spread`, drawn from the run seed.
    FubiniStudy { level: i64, spread: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum ZetaConfig {
    SummandWeights(Vec<BigRational>),
    CoordinateWeights(Vec<BigRational>),
    Blocks(Vec<(BigRational, Vec<Vec<GaussRational>>)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BergmanConfig {
    pub k_list: Vec<i64>,
    pub tolerance: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MdonPath {
    /// Bergman geodesic when both ends are FS at one level, else pointwise.
    Auto,
    Bergman,
    Pointwise,
}

impl MdonPath {
    pub fn name(self) -> &'static str {
        match self {
            MdonPath::Auto => "auto",
            MdonPath::Bergman => "bergman",
            MdonPath::Pointwise => "pointwise",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MdonConfig {
    pub spread: f64,
    pub path: MdonPath,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlopeConfig {
    pub t_max: f64,
    pub n_t: usize,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub he_tol: f64,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub initial_step: f64,
    pub max_step: f64,
    pub max_step_spread: f64,
    pub divergence_log_norm: f64,
    pub divergence_mdon: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaAuditConfig {
    pub samples: usize,
    pub spread: f64,
    pub allow_reducible: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeConfig {
    pub k_list: Vec<i64>,
    pub samples_per_k: usize,
    pub t_max: f64,
    pub n_t: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexityConfig {
    pub paths: usize,
    pub spread: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub bundle: BundleSpec,
    pub k: i64,
    pub quadrature: (usize, usize),
    pub seed: u64,
    /// Unset means `--out`, then `HE_OUTPUT_DIR`, then `he-out`.
    pub output_dir: Option<String>,
    pub metric: MetricChoice,
    pub zeta: Option<ZetaConfig>,
    pub bergman: BergmanConfig,
    pub mdon: MdonConfig,
    pub slope: SlopeConfig,
    pub solve: SolveConfig,
    pub delta_audit: DeltaAuditConfig,
    pub probe: ProbeConfig,
    pub convexity: ConvexityConfig,
}

pub const DEFAULT_OUTPUT_DIR: &str = "he-out";

impl Default for SolveConfig {
    fn default() -> Self {
        let o = hermitian_einstein::solver::SolveOptions::default();
        SolveConfig {
            max_iter: o.max_iter,
            grad_tol: o.grad_tol,
            he_tol: o.he_tol,
            armijo_c1: o.armijo_c1,
            backtrack: o.backtrack,
            max_backtracks: o.max_backtracks,
            initial_step: o.initial_step,
            max_step: o.max_step,
            max_step_spread: o.max_step_spread,
            divergence_log_norm: o.divergence_log_norm,
            divergence_mdon: o.divergence_mdon,
        }
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    parse_str(&text)
}

pub fn parse_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    from_value(&value)
}

/// Walks one JSON object, recording problems under their field paths.
struct Fields<'a> {
    path: String,
    map: Option<&'a Map<String, Value>>,
    seen: Vec<&'static str>,
}

impl<'a> Fields<'a> {
    fn new(path: &str, value: Option<&'a Value>, errors: &mut Vec<String>) -> Self {
        let map = match value {
            None => None,
            Some(Value::Object(m)) => Some(m),
            Some(_) => {
                errors.push(format!("{path}: expected an object"));
                None
            }
        };
        Fields {
            path: path.to_string(),
            map,
            seen: Vec::new(),
        }
    }

    fn at(&self, key: &str) -> String {
        format!("{}.{key}", self.path)
    }

    fn get(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.push(key);
        self.map.and_then(|m| m.get(key))
    }

    fn finish(self, errors: &mut Vec<String>) {
        if let Some(m) = self.map {
            for key in m.keys() {
                if !self.seen.contains(&key.as_str()) {
                    errors.push(format!("{}: unknown key", self.at(key)));
                }
            }
        }
    }

    fn float(&mut self, key: &'static str, default: f64, check: Check, errors: &mut Vec<String>) -> f64 {
        let path = self.at(key);
        match self.get(key) {
            None => default,
            Some(v) => match v.as_f64() {
                Some(x) if x.is_finite() => {
                    check.apply(&path, x, errors);
                    x
                }
                _ => {
                    errors.push(format!("{path}: expected a finite number"));
                    default
                }
            },
        }
    }

    fn count(&mut self, key: &'static str, default: usize, min: usize, errors: &mut Vec<String>) -> usize {
        let path = self.at(key);
        match self.get(key) {
            None => default,
            Some(v) => match v.as_u64() {
                Some(x) if x as usize >= min => x as usize,
                _ => {
                    errors.push(format!("{path}: expected an integer ≥ {min}"));
                    default
                }
            },
        }
    }

    fn flag(&mut self, key: &'static str, default: bool, errors: &mut Vec<String>) -> bool {
        let path = self.at(key);
        match self.get(key) {
            None => default,
            Some(Value::Bool(b)) => *b,
            Some(_) => {
                errors.push(format!("{path}: expected true or false"));
                default
            }
        }
    }

    fn levels(&mut self, key: &'static str, errors: &mut Vec<String>) -> Option<Vec<i64>> {
        let path = self.at(key);
        match self.get(key)? {
            Value::Array(items) if !items.is_empty() => {
                let out: Vec<Option<i64>> = items.iter().map(Value::as_i64).collect();
                if out.iter().any(Option::is_none) {
                    errors.push(format!("{path}: expected a nonempty list of integers"));
                    return None;
                }
                Some(out.into_iter().flatten().collect())
            }
            _ => {
                errors.push(format!("{path}: expected a nonempty list of integers"));
                None
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Check {
    Positive,
    NonNegative,
    Negative,
    /// Open unit interval.
    Fraction,
}

impl Check {
    fn apply(self, path: &str, x: f64, errors: &mut Vec<String>) {
        let ok = match self {
            Check::Positive => x > 0.0,
            Check::NonNegative => x >= 0.0,
            Check::Negative => x < 0.0,
            Check::Fraction => x > 0.0 && x < 1.0,
        };
        if !ok {
            let want = match self {
                Check::Positive => "positive",
                Check::NonNegative => "nonnegative",
                Check::Negative => "negative",
                Check::Fraction => "strictly between 0 and 1",
            };
            errors.push(format!("{path}: must be {want}, got {x}"));
        }
    }
}

fn parse_rational(v: &Value) -> Option<BigRational> {
    match v {
        Value::String(s) => BigRational::from_str(s.trim()).ok(),
        Value::Number(n) => n.as_i64().map(|i| BigRational::from_integer(i.into())),
        _ => None,
    }
}

/// A vector entry: "p/q" for a real number, ["p/q", "r/s"] for re and im.
fn parse_gauss(v: &Value) -> Option<GaussRational> {
    match v {
        Value::Array(parts) if parts.len() == 2 => Some(Complex::new(parse_rational(&parts[0])?, parse_rational(&parts[1])?)),
        _ => parse_rational(v).map(|re| Complex::new(re, BigRational::from_integer(0.into()))),
    }
}

fn rational_list(path: &str, v: &Value, errors: &mut Vec<String>) -> Vec<BigRational> {
    match v {
        Value::Array(items) if !items.is_empty() => items
            .iter()
            .enumerate()
            .filter_map(|(i, x)| {
                let r = parse_rational(x);
                if r.is_none() {
                    errors.push(format!("{path}[{i}]: expected a rational \"p/q\" or an integer"));
                }
                r
            })
            .collect(),
        _ => {
            errors.push(format!("{path}: expected a nonempty list of rationals"));
            Vec::new()
        }
    }
}

fn parse_zeta(v: &Value, errors: &mut Vec<String>) -> Option<ZetaConfig> {
    let mut f = Fields::new("$.zeta", Some(v), errors);
    let summand = f.get("summand_weights");
    let coordinate = f.get("coordinate_weights");
    let blocks = f.get("blocks");
    f.finish(errors);
    let given = [summand.is_some(), coordinate.is_some(), blocks.is_some()].iter().filter(|b| **b).count();
    if given != 1 {
        errors.push("$.zeta: give exactly one of summand_weights, coordinate_weights, blocks".into());
        return None;
    }
    if let Some(s) = summand {
        return Some(ZetaConfig::SummandWeights(rational_list("$.zeta.summand_weights", s, errors)));
    }
    if let Some(s) = coordinate {
        return Some(ZetaConfig::CoordinateWeights(rational_list("$.zeta.coordinate_weights", s, errors)));
    }
    let items = match blocks? {
        Value::Array(items) if !items.is_empty() => items,
        _ => {
            errors.push("$.zeta.blocks: expected a nonempty list".into());
            return None;
        }
    };
    let mut out = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let path = format!("$.zeta.blocks[{i}]");
        let mut f = Fields::new(&path, Some(item), errors);
        let weight = f.get("weight");
        let vectors = f.get("vectors");
        f.finish(errors);
        let weight = match weight.and_then(parse_rational) {
            Some(w) => w,
            None => {
                errors.push(format!("{path}.weight: expected a rational"));
                continue;
            }
        };
        let mut vecs = Vec::new();
        match vectors {
            Some(Value::Array(vs)) if !vs.is_empty() => {
                for (j, vec) in vs.iter().enumerate() {
                    let entries = match vec {
                        Value::Array(e) if !e.is_empty() => e,
                        _ => {
                            errors.push(format!("{path}.vectors[{j}]: expected a nonempty list"));
                            continue;
                        }
                    };
                    let parsed: Vec<Option<GaussRational>> = entries.iter().map(parse_gauss).collect();
                    if parsed.iter().any(Option::is_none) {
                        errors.push(format!("{path}.vectors[{j}]: entries must be \"p/q\" or [\"re\", \"im\"]"));
                        continue;
                    }
                    vecs.push(parsed.into_iter().flatten().collect());
                }
            }
            _ => errors.push(format!("{path}.vectors: expected a nonempty list of vectors")),
        }
        out.push((weight, vecs));
    }
    Some(ZetaConfig::Blocks(out))
}

fn parse_metric(v: Option<&Value>, errors: &mut Vec<String>) -> MetricChoice {
    let Some(v) = v else {
        return MetricChoice::Standard;
    };
    let mut f = Fields::new("$.metric", Some(v), errors);
    let kind = f.get("kind").and_then(Value::as_str).map(str::to_string);
    let out = match kind.as_deref() {
        Some("standard") => MetricChoice::Standard,
        Some("fubini_study") => {
            let level = match f.get("level").map(Value::as_i64) {
                Some(Some(l)) => l,
                _ => {
                    errors.push("$.metric.level: expected an integer".into());
                    0
                }
            };
            let spread = f.float("spread", 0.3, Check::NonNegative, errors);
            MetricChoice::FubiniStudy { level, spread }
        }
        _ => {
            errors.push("$.metric.kind: expected \"standard\" or \"fubini_study\"".into());
            MetricChoice::Standard
        }
    };
    f.finish(errors);
    out
}

fn from_value(value: &Value) -> Result<ExperimentConfig, ConfigError> {
    let mut errors = Vec::new();
    let mut top = Fields::new("$", Some(value), &mut errors);
    let bundle = match top.get("bundle") {
        None => {
            errors.push("$.bundle: missing required field".into());
            None
        }
        Some(Value::Array(items)) => {
            let degrees: Vec<Option<i64>> = items.iter().map(Value::as_i64).collect();
            if degrees.iter().any(Option::is_none) {
                errors.push("$.bundle: expected a list of integer degrees".into());
                None
            } else {
                match BundleSpec::new(degrees.into_iter().flatten().collect()) {
                    Ok(b) => Some(b),
                    Err(e) => {
                        errors.push(format!("$.bundle: {e}"));
                        None
                    }
                }
            }
        }
        Some(_) => {
            errors.push("$.bundle: expected a list of integer degrees".into());
            None
        }
    };
    let regularity = bundle.as_ref().map(BundleSpec::regularity);
    let k = match top.get("k") {
        None => regularity.unwrap_or(0),
        Some(v) => match v.as_i64() {
            Some(k) => k,
            None => {
                errors.push("$.k: expected an integer".into());
                0
            }
        },
    };
    if let (Some(b), Some(reg)) = (&bundle, regularity) {
        if k < reg {
            errors.push(format!("$.k: {k} is below the regularity of {b}; the minimum is {reg}"));
        }
    }
    let quadrature = {
        let mut f = Fields::new("$.quadrature", top.get("quadrature"), &mut errors);
        let q = (
            f.count("n_colat", 32, 1, &mut errors),
            f.count("n_angle", 32, 1, &mut errors),
        );
        f.finish(&mut errors);
        q
    };
    let seed = match top.get("seed") {
        None => 0,
        Some(v) => v.as_u64().unwrap_or_else(|| {
            errors.push("$.seed: expected a nonnegative integer".into());
            0
        }),
    };
    let output_dir = match top.get("output_dir") {
        None => None,
        Some(Value::String(s)) if !s.is_empty() => Some(s.clone()),
        Some(_) => {
            errors.push("$.output_dir: expected a nonempty string".into());
            None
        }
    };
    let metric = parse_metric(top.get("metric"), &mut errors);
    if let (MetricChoice::FubiniStudy { level, .. }, Some(reg)) = (&metric, regularity) {
        if *level < reg {
            errors.push(format!("$.metric.level: {level} is below the regularity; the minimum is {reg}"));
        }
    }
    let zeta = top.get("zeta").and_then(|v| parse_zeta(v, &mut errors));

    let bergman = {
        let mut f = Fields::new("$.bergman", top.get("bergman"), &mut errors);
        let k_list = f.levels("k_list", &mut errors).unwrap_or_else(|| vec![k]);
        let given = f.get("tolerance").is_some();
        let tolerance = given.then(|| f.float("tolerance", 0.0, Check::Positive, &mut errors));
        f.finish(&mut errors);
        BergmanConfig { k_list, tolerance }
    };
    let mdon = {
        let mut f = Fields::new("$.mdon", top.get("mdon"), &mut errors);
        let spread = f.float("spread", 0.5, Check::Positive, &mut errors);
        let path = match f.get("path").map(Value::as_str) {
            None | Some(Some("auto")) => MdonPath::Auto,
            Some(Some("bergman")) => MdonPath::Bergman,
            Some(Some("pointwise")) => MdonPath::Pointwise,
            Some(_) => {
                errors.push("$.mdon.path: expected \"auto\", \"bergman\" or \"pointwise\"".into());
                MdonPath::Auto
            }
        };
        f.finish(&mut errors);
        MdonConfig { spread, path }
    };
    let slope = {
        let mut f = Fields::new("$.slope", top.get("slope"), &mut errors);
        let t_max = f.float("t_max", 30.0, Check::Positive, &mut errors);
        if t_max < 10.0 {
            errors.push(format!("$.slope.t_max: must be at least 10, got {t_max}"));
        }
        let s = SlopeConfig {
            t_max,
            n_t: f.count("n_t", 16, 4, &mut errors),
            tolerance: f.float("tolerance", 0.1, Check::Positive, &mut errors),
        };
        f.finish(&mut errors);
        s
    };
    let solve = {
        let d = SolveConfig::default();
        let mut f = Fields::new("$.solve", top.get("solve"), &mut errors);
        let s = SolveConfig {
            max_iter: f.count("max_iter", d.max_iter, 1, &mut errors),
            grad_tol: f.float("grad_tol", d.grad_tol, Check::Positive, &mut errors),
            he_tol: f.float("he_tol", d.he_tol, Check::Positive, &mut errors),
            armijo_c1: f.float("armijo_c1", d.armijo_c1, Check::Fraction, &mut errors),
            backtrack: f.float("backtrack", d.backtrack, Check::Fraction, &mut errors),
            max_backtracks: f.count("max_backtracks", d.max_backtracks, 1, &mut errors),
            initial_step: f.float("initial_step", d.initial_step, Check::Positive, &mut errors),
            max_step: f.float("max_step", d.max_step, Check::Positive, &mut errors),
            max_step_spread: f.float("max_step_spread", d.max_step_spread, Check::Positive, &mut errors),
            divergence_log_norm: f.float("divergence_log_norm", d.divergence_log_norm, Check::Positive, &mut errors),
            divergence_mdon: f.float("divergence_mdon", d.divergence_mdon, Check::Negative, &mut errors),
        };
        f.finish(&mut errors);
        s
    };
    let delta_audit = {
        let mut f = Fields::new("$.delta_audit", top.get("delta_audit"), &mut errors);
        let s = DeltaAuditConfig {
            samples: f.count("samples", 50, 1, &mut errors),
            spread: f.float("spread", 1.0, Check::Positive, &mut errors),
            allow_reducible: f.flag("allow_reducible", false, &mut errors),
        };
        f.finish(&mut errors);
        s
    };
    let probe = {
        let mut f = Fields::new("$.probe", top.get("probe"), &mut errors);
        let s = ProbeConfig {
            k_list: f.levels("k_list", &mut errors).unwrap_or_else(|| vec![k]),
            samples_per_k: f.count("samples_per_k", 8, 1, &mut errors),
            t_max: f.float("t_max", 12.0, Check::Positive, &mut errors),
            n_t: f.count("n_t", 7, 2, &mut errors),
        };
        f.finish(&mut errors);
        s
    };
    let convexity = {
        let mut f = Fields::new("$.convexity", top.get("convexity"), &mut errors);
        let s = ConvexityConfig {
            paths: f.count("paths", 10, 1, &mut errors),
            spread: f.float("spread", 0.5, Check::Positive, &mut errors),
            tolerance: f.float("tolerance", 1e-4, Check::Positive, &mut errors),
        };
        f.finish(&mut errors);
        s
    };
    if let Some(reg) = regularity {
        for (path, list) in [("$.bergman.k_list", &bergman.k_list), ("$.probe.k_list", &probe.k_list)] {
            for (i, level) in list.iter().enumerate() {
                if *level < reg {
                    errors.push(format!("{path}[{i}]: {level} is below the regularity; the minimum is {reg}"));
                }
            }
        }
    }
    top.finish(&mut errors);
    match bundle {
        Some(bundle) if errors.is_empty() => Ok(ExperimentConfig {
            bundle,
            k,
            quadrature,
            seed,
            output_dir,
            metric,
            zeta,
            bergman,
            mdon,
            slope,
            solve,
            delta_audit,
            probe,
            convexity,
        }),
        _ => Err(ConfigError::Schema(errors)),
    }
}

fn gauss_json(z: &GaussRational) -> Value {
    if z.im == BigRational::from_integer(0.into()) {
        Value::String(format_ratio(&z.re))
    } else {
        json!([format_ratio(&z.re), format_ratio(&z.im)])
    }
}

impl ExperimentConfig {
    /// Canonical form with every default written out.
    pub fn to_json(&self) -> Value {
        let metric = match &self.metric {
            MetricChoice::Standard => json!({"kind": "standard"}),
            MetricChoice::FubiniStudy { level, spread } => {
                json!({"kind": "fubini_study", "level": level, "spread": float(*spread)})
            }
        };
        let mut out = json!({
            "bundle": self.bundle.degrees(),
            "k": self.k,
            "quadrature": {"n_colat": self.quadrature.0, "n_angle": self.quadrature.1},
            "seed": self.seed,
            "metric": metric,
        });
        let map = out.as_object_mut().expect("object literal");
        if let Some(dir) = &self.output_dir {
            map.insert("output_dir".into(), Value::String(dir.clone()));
        }
        if let Some(z) = &self.zeta {
            let zv = match z {
                ZetaConfig::SummandWeights(w) => json!({"summand_weights": w.iter().map(rational).collect::<Vec<_>>()}),
                ZetaConfig::CoordinateWeights(w) => {
                    json!({"coordinate_weights": w.iter().map(rational).collect::<Vec<_>>()})
                }
                ZetaConfig::Blocks(blocks) => json!({"blocks": blocks
                    .iter()
                    .map(|(w, vs)| json!({
                        "weight": rational(w),
                        "vectors": vs.iter().map(|v| v.iter().map(gauss_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
                    }))
                    .collect::<Vec<_>>()}),
            };
            map.insert("zeta".into(), zv);
        }
        let mut bergman = json!({"k_list": self.bergman.k_list});
        if let Some(t) = self.bergman.tolerance {
            bergman["tolerance"] = float(t);
        }
        map.insert("bergman".into(), bergman);
        map.insert(
            "mdon".into(),
            json!({"spread": float(self.mdon.spread), "path": self.mdon.path.name()}),
        );
        map.insert(
            "slope".into(),
            json!({"t_max": float(self.slope.t_max), "n_t": self.slope.n_t, "tolerance": float(self.slope.tolerance)}),
        );
        let s = &self.solve;
        map.insert(
            "solve".into(),
            json!({
                "max_iter": s.max_iter,
                "grad_tol": float(s.grad_tol),
                "he_tol": float(s.he_tol),
                "armijo_c1": float(s.armijo_c1),
                "backtrack": float(s.backtrack),
                "max_backtracks": s.max_backtracks,
                "initial_step": float(s.initial_step),
                "max_step": float(s.max_step),
                "max_step_spread": float(s.max_step_spread),
                "divergence_log_norm": float(s.divergence_log_norm),
                "divergence_mdon": float(s.divergence_mdon),
            }),
        );
        map.insert(
            "delta_audit".into(),
            json!({
                "samples": self.delta_audit.samples,
                "spread": float(self.delta_audit.spread),
                "allow_reducible": self.delta_audit.allow_reducible,
            }),
        );
        map.insert(
            "probe".into(),
            json!({
                "k_list": self.probe.k_list,
                "samples_per_k": self.probe.samples_per_k,
                "t_max": float(self.probe.t_max),
                "n_t": self.probe.n_t,
            }),
        );
        map.insert(
            "convexity".into(),
            json!({
                "paths": self.convexity.paths,
                "spread": float(self.convexity.spread),
                "tolerance": float(self.convexity.tolerance),
            }),
        );
        out
    }

    pub fn solve_options(&self) -> hermitian_einstein::solver::SolveOptions {
        let s = &self.solve;
        hermitian_einstein::solver::SolveOptions {
            k: self.k,
            max_iter: s.max_iter,
            grad_tol: s.grad_tol,
            he_tol: s.he_tol,
            armijo_c1: s.armijo_c1,
            backtrack: s.backtrack,
            max_backtracks: s.max_backtracks,
            initial_step: s.initial_step,
            max_step: s.max_step,
            max_step_spread: s.max_step_spread,
            divergence_log_norm: s.divergence_log_norm,
            divergence_mdon: s.divergence_mdon,
            quadrature: self.quadrature,
        }
    }
}
