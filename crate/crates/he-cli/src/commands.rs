//! One function per subcommand. Each returns the command-specific results,
//! the CSV traces and whether the audit passed.

use std::sync::Arc;

use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use hermitian_einstein::asymptotics::{coercivity_probe, slope_estimate, OnePSRay};
use hermitian_einstein::bundle::{ScaledMetric, SharedMetric, StandardMetric};
use hermitian_einstein::donaldson::{
    c_delta, cocycle_defect, delta_lower_bound_audit, donaldson, second_derivative_geodesic, PathKind, PathSpec,
};
use hermitian_einstein::geometry::QuadratureRule;
use hermitian_einstein::linalg::{herm_exp, random_hermitian, CMat};
use hermitian_einstein::quot::{filtration, stability_classify, FiltrationReport, WeightBlock, WeightSpec};
use hermitian_einstein::sections::{bergman_kernel, l2_gram, FsMetric, PositiveForm, SectionBasis};
use hermitian_einstein::solver::{destabilizer_extract, minimize, SolveStatus};
use hermitian_einstein::{Error, Result};

use crate::config::{ExperimentConfig, MdonPath, MetricChoice, ZetaConfig};
use crate::report::{float, floats, rational, Cell, Csv};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Bergman,
    Mdon,
    Mna,
    SlopeTest,
    Solve,
    AuditDeltabound,
    ProbeCoercivity,
    ConvexityAudit,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Bergman,
        Command::Mdon,
        Command::Mna,
        Command::SlopeTest,
        Command::Solve,
        Command::AuditDeltabound,
        Command::ProbeCoercivity,
        Command::ConvexityAudit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Bergman => "bergman",
            Command::Mdon => "mdon",
            Command::Mna => "mna",
            Command::SlopeTest => "slope-test",
            Command::Solve => "solve",
            Command::AuditDeltabound => "audit-deltabound",
            Command::ProbeCoercivity => "probe-coercivity",
            Command::ConvexityAudit => "convexity-audit",
        }
    }
}

pub struct RunOutput {
    pub results: Value,
    pub traces: Vec<Csv>,
    pub pass: bool,
}

/// Full report for a finished command. Wall time is kept out so that the
/// report depends only on the config.
pub fn report(command: Command, cfg: &ExperimentConfig, out: &RunOutput) -> Value {
    json!({
        "command": command.name(),
        "config": cfg.to_json(),
        "pass": out.pass,
        "results": out.results,
        "versions": {
            "he-cli": env!("CARGO_PKG_VERSION"),
            "hermitian-einstein": hermitian_einstein::VERSION,
        },
    })
}

pub fn run(command: Command, cfg: &ExperimentConfig) -> Result<RunOutput> {
    match command {
        Command::Bergman => bergman(cfg),
        Command::Mdon => mdon(cfg),
        Command::Mna => mna(cfg),
        Command::SlopeTest => slope_test(cfg),
        Command::Solve => solve(cfg),
        Command::AuditDeltabound => audit_deltabound(cfg),
        Command::ProbeCoercivity => probe_coercivity(cfg),
        Command::ConvexityAudit => convexity_audit(cfg),
    }
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Independent generator for one use of randomness within a run.
fn stream(cfg: &ExperimentConfig, id: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed ^ id.wrapping_add(1).wrapping_mul(GOLDEN))
}

const REFERENCE_STREAM: u64 = 0;

fn rule(cfg: &ExperimentConfig) -> Result<QuadratureRule> {
    QuadratureRule::new(cfg.quadrature.0, cfg.quadrature.1)
}

/// FS metric of the form exp(A), A random hermitian of the given size.
fn random_fs(basis: &SectionBasis, spread: f64, rng: &mut ChaCha8Rng) -> Result<FsMetric> {
    let g = PositiveForm::new(herm_exp(&random_hermitian(basis.dim(), spread, rng)))?;
    FsMetric::new(basis.clone(), &g)
}

fn reference(cfg: &ExperimentConfig) -> Result<SharedMetric> {
    Ok(match &cfg.metric {
        MetricChoice::Standard => Arc::new(StandardMetric::new(cfg.bundle.clone())),
        MetricChoice::FubiniStudy { level, spread } => {
            let basis = SectionBasis::new(cfg.bundle.clone(), *level)?;
            Arc::new(random_fs(&basis, *spread, &mut stream(cfg, REFERENCE_STREAM))?)
        }
    })
}

fn zeta_spec(cfg: &ExperimentConfig, basis: &SectionBasis) -> Result<WeightSpec> {
    match &cfg.zeta {
        None => Err(Error::Argument("this command needs a \"zeta\" block in the config".into())),
        Some(ZetaConfig::SummandWeights(w)) => WeightSpec::summand_weights(basis, w),
        Some(ZetaConfig::CoordinateWeights(w)) => {
            if w.len() != basis.dim() {
                return Err(Error::Argument(format!(
                    "coordinate_weights has {} entries but H⁰ has dimension {}",
                    w.len(),
                    basis.dim()
                )));
            }
            WeightSpec::from_coordinate_weights(basis.level(), w)
        }
        Some(ZetaConfig::Blocks(blocks)) => WeightSpec::new(
            basis.level(),
            blocks
                .iter()
                .map(|(w, v)| WeightBlock {
                    weight: w.clone(),
                    vectors: v.clone(),
                })
                .collect(),
        ),
    }
}

fn complex_matrix(m: &CMat) -> Value {
    Value::Array(
        m.row_iter()
            .map(|row| Value::Array(row.iter().map(|z| json!([float(z.re), float(z.im)])).collect()))
            .collect(),
    )
}

fn opt_rational(x: Option<BigRational>) -> Value {
    x.as_ref().map_or(Value::Null, rational)
}

fn filtration_json(rep: &FiltrationReport) -> Value {
    let levels: Vec<Value> = rep
        .levels
        .iter()
        .map(|l| {
            json!({
                "weight": rational(&l.weight),
                "rank": l.rank,
                "degree": l.degree,
                "slope": opt_rational(l.slope()),
            })
        })
        .collect();
    let destabilizing = rep.destabilizing_level().map_or(Value::Null, |l| {
        json!({"rank": l.rank, "degree": l.degree, "slope": opt_rational(l.slope())})
    });
    json!({
        "mna": rational(&rep.mna),
        "jna": rational(&rep.jna),
        "mna_by_q_sum": rational(&rep.mna_by_q_sum()),
        "j": rep.j.to_string(),
        "mu": rational(&rep.mu),
        "graded_ranks": rep.graded_ranks,
        "levels": levels,
        "destabilizing_level": destabilizing,
    })
}

fn bergman(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let rule = rule(cfg)?;
    let h = reference(cfg)?;
    let mut trace = Csv::new("bergman", &["k", "sup_deviation", "mean_raw_eigenvalue"]);
    let mut rows = Vec::new();
    let mut pass = true;
    for &k in &cfg.bergman.k_list {
        let rep = bergman_kernel(h.clone(), k, &rule)?;
        if let Some(tol) = cfg.bergman.tolerance {
            pass &= rep.sup_dev <= tol;
        }
        trace.push(vec![Cell::Int(k), Cell::Float(rep.sup_dev), Cell::Float(rep.raw_mean)]);
        rows.push(json!({"k": k, "sup_deviation": float(rep.sup_dev), "mean_raw_eigenvalue": float(rep.raw_mean)}));
    }
    Ok(RunOutput {
        results: json!({"rows": rows, "tolerance": cfg.bergman.tolerance.map_or(Value::Null, float)}),
        traces: vec![trace],
        pass,
    })
}

fn mdon(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let rule = rule(cfg)?;
    let basis = SectionBasis::new(cfg.bundle.clone(), cfg.k)?;
    let h0 = reference(cfg)?;
    let h1: SharedMetric = Arc::new(random_fs(&basis, cfg.mdon.spread, &mut stream(cfg, 1))?);
    let h2: SharedMetric = Arc::new(random_fs(&basis, cfg.mdon.spread, &mut stream(cfg, 2))?);
    let same_level = h0.as_fs().is_some_and(|f| f.basis() == &basis);
    let kind = match cfg.mdon.path {
        MdonPath::Bergman => PathKind::Bergman,
        MdonPath::Pointwise => PathKind::PointwiseExponential,
        MdonPath::Auto if same_level => PathKind::Bergman,
        MdonPath::Auto => PathKind::PointwiseExponential,
    };
    let path = PathSpec {
        kind,
        ..PathSpec::default()
    };
    let m10 = donaldson(&h1, &h0, &path, &rule)?;
    let defect = cocycle_defect(&h2, &h1, &h0, &path, &rule)?;
    // constant rate in t along a scaling path
    let pointwise = PathSpec {
        kind: PathKind::PointwiseExponential,
        t_order: 4,
    };
    let mut scaling = Vec::new();
    for c in [-5.0_f64, -1.0, 1.0, 5.0] {
        let scaled: SharedMetric = Arc::new(ScaledMetric::new(h1.clone(), c.exp())?);
        scaling.push(json!({"log_factor": float(c), "mdon": float(donaldson(&scaled, &h1, &pointwise, &rule)?)}));
    }
    Ok(RunOutput {
        results: json!({
            "path": match kind { PathKind::Bergman => "bergman", PathKind::PointwiseExponential => "pointwise" },
            "mdon": float(m10),
            "cocycle_defect": float(defect),
            "scaling": scaling,
        }),
        traces: Vec::new(),
        pass: true,
    })
}

fn mna(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let basis = SectionBasis::new(cfg.bundle.clone(), cfg.k)?;
    let zeta = zeta_spec(cfg, &basis)?;
    let rep = filtration(&cfg.bundle, &zeta)?;
    let mut results = filtration_json(&rep);
    results["stability"] = Value::String(stability_classify(&cfg.bundle).name().into());
    Ok(RunOutput {
        results,
        traces: Vec::new(),
        pass: true,
    })
}

fn slope_test(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let rule = rule(cfg)?;
    let basis = SectionBasis::new(cfg.bundle.clone(), cfg.k)?;
    let zeta = zeta_spec(cfg, &basis)?;
    let g0 = l2_gram(&basis, reference(cfg)?.as_ref(), &rule)?;
    let (ray, scaled) = OnePSRay::from_weights(basis, g0, &zeta)?;
    let rep = slope_estimate(&ray, &scaled, cfg.slope.t_max, cfg.slope.n_t, &rule)?;
    let m = hermitian_einstein::asymptotics::ratio_to_f64(&rep.mna_exact);
    let mut trace = Csv::new("slope", &["t", "mdon", "mna_t"]);
    for (t, v) in rep.t_grid.iter().zip(&rep.mdon_values) {
        trace.push(vec![Cell::Float(*t), Cell::Float(*v), Cell::Float(m * t)]);
    }
    Ok(RunOutput {
        results: json!({
            "rescaled_weights": scaled.weights().iter().map(rational).collect::<Vec<_>>(),
            "mna": rational(&rep.mna_exact),
            "fitted_slope": float(rep.fitted_slope),
            "relative_gap": float(rep.relative_gap),
            "lower_bound_offset": float(rep.c_offset),
            "tolerance": float(cfg.slope.tolerance),
        }),
        traces: vec![trace],
        pass: rep.relative_gap <= cfg.slope.tolerance,
    })
}

fn solve(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let h_ref = reference(cfg)?;
    let res = minimize(&cfg.bundle, &cfg.solve_options(), &h_ref)?;
    let mut trace = Csv::new("solve_history", &["iter", "mdon", "he_residual", "log_norm", "grad_norm", "step"]);
    for r in &res.history {
        trace.push(vec![
            Cell::Int(r.iter as i64),
            Cell::Float(r.mdon),
            Cell::Float(r.he_residual),
            Cell::Float(r.log_norm),
            Cell::Float(r.grad_norm),
            Cell::Float(r.step),
        ]);
    }
    let last = res.history.last().expect("the history holds the starting point");
    let mut results = json!({
        "status": res.status.name(),
        "iterations": last.iter,
        "he_residual_sup": float(res.he_residual_sup),
        "final_mdon": float(last.mdon),
        "log_norm": float(last.log_norm),
        "normalization": float(res.normalization),
    });
    if res.status == SolveStatus::Converged {
        results["g_final"] = complex_matrix(&res.g_final()?);
    }
    if let Some(z) = &res.zeta_limit {
        results["zeta_limit_weights"] = floats(&z.weights);
        results["destabilizer"] = filtration_json(&destabilizer_extract(&res, &cfg.bundle, cfg.k)?);
    }
    Ok(RunOutput {
        results,
        traces: vec![trace],
        pass: res.status != SolveStatus::MaxIter,
    })
}

fn audit_deltabound(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let rule = rule(cfg)?;
    let h0 = reference(cfg)?;
    // samples live at the reference's own level when it is FS, so that M
    // can follow Bergman geodesics
    let (basis, g0) = match h0.as_fs() {
        Some(f) => (f.basis().clone(), PositiveForm::new(f.gram()?)?),
        None => {
            let basis = SectionBasis::new(cfg.bundle.clone(), cfg.k)?;
            let g0 = l2_gram(&basis, h0.as_ref(), &rule)?;
            (basis, g0)
        }
    };
    let outcomes: Vec<Result<_>> = (0..cfg.delta_audit.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(cfg, 100 + i as u64);
            let amp = cfg.delta_audit.spread * rand::Rng::random_range(&mut rng, 0.05..=1.0);
            let e = herm_exp(&random_hermitian(basis.dim(), amp, &mut rng));
            let g = PositiveForm::new(hermitian_einstein::linalg::hermitian_part(&(&e * g0.matrix() * &e)))?;
            let h: SharedMetric = Arc::new(FsMetric::new(basis.clone(), &g)?);
            delta_lower_bound_audit(&h, &h0, &rule, cfg.delta_audit.allow_reducible)
        })
        .collect();
    let mut trace = Csv::new("deltabound", &["sample", "delta", "c_delta", "mdon", "bound", "pass"]);
    let mut samples = Vec::new();
    let mut pass = true;
    for (i, r) in outcomes.into_iter().enumerate() {
        let r = r?;
        pass &= r.pass;
        trace.push(vec![
            Cell::Int(i as i64),
            Cell::Float(r.delta),
            Cell::Float(r.c_delta),
            Cell::Float(r.mdon),
            Cell::Float(r.bound),
            Cell::Text(r.pass.to_string()),
        ]);
        samples.push(json!({
            "delta": float(r.delta),
            "c_delta": float(r.c_delta),
            "mdon": float(r.mdon),
            "bound": float(r.bound),
            "he_defect": float(r.he_defect),
            "poincare": float(r.poincare),
            "poincare_stable": r.poincare_stable,
            "pass": r.pass,
        }));
    }
    let e_inv = (-1.0_f64).exp();
    Ok(RunOutput {
        results: json!({
            "samples": samples,
            "c_delta_spot_checks": [
                {"delta": float(e_inv), "c_delta": float(c_delta(e_inv)?)},
                {"delta": float(1.0), "c_delta": float(c_delta(1.0)?)},
            ],
        }),
        traces: vec![trace],
        pass,
    })
}

fn probe_coercivity(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let rule = rule(cfg)?;
    let p = &cfg.probe;
    let rows = coercivity_probe(&cfg.bundle, &p.k_list, p.samples_per_k, p.t_max, p.n_t, &rule, cfg.seed)?;
    let mut trace = Csv::new("coercivity", &["k", "samples", "c_k", "worst_mna", "min_mna"]);
    let mut out = Vec::new();
    for r in &rows {
        trace.push(vec![
            Cell::Int(r.k),
            Cell::Int(r.samples as i64),
            Cell::Float(r.c_k),
            Cell::Text(hermitian_einstein::quot::poly::format_ratio(&r.worst_mna)),
            Cell::Text(hermitian_einstein::quot::poly::format_ratio(&r.min_mna)),
        ]);
        out.push(json!({
            "k": r.k,
            "samples": r.samples,
            "c_k": float(r.c_k),
            "worst_mna": rational(&r.worst_mna),
            "min_mna": rational(&r.min_mna),
        }));
    }
    Ok(RunOutput {
        pass: rows.iter().all(|r| r.c_k.is_finite()),
        results: json!({"rows": out}),
        traces: vec![trace],
    })
}

pub const CONVEXITY_FLOOR: f64 = -1e-8;

fn convexity_audit(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let rule = rule(cfg)?;
    let basis = SectionBasis::new(cfg.bundle.clone(), cfg.k)?;
    let tol = cfg.convexity.tolerance;
    let per_path: Vec<Result<Vec<(f64, f64, f64)>>> = (0..cfg.convexity.paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(cfg, 1000 + i as u64);
            let h0: SharedMetric = Arc::new(random_fs(&basis, cfg.convexity.spread, &mut rng)?);
            let h1: SharedMetric = Arc::new(random_fs(&basis, cfg.convexity.spread, &mut rng)?);
            [0.0, 0.5, 1.0]
                .iter()
                .map(|&s| {
                    let d = second_derivative_geodesic(&h0, &h1, s, &rule)?;
                    Ok((s, d.formula, d.fd))
                })
                .collect()
        })
        .collect();
    let mut trace = Csv::new("convexity", &["path", "s", "formula", "fd"]);
    let mut rows = Vec::new();
    let mut pass = true;
    for (i, r) in per_path.into_iter().enumerate() {
        for (s, formula, fd) in r? {
            let ok = fd >= CONVEXITY_FLOOR && (fd - formula).abs() <= tol * formula.abs().max(1.0);
            pass &= ok;
            trace.push(vec![Cell::Int(i as i64), Cell::Float(s), Cell::Float(formula), Cell::Float(fd)]);
            rows.push(json!({"path": i, "s": float(s), "formula": float(formula), "fd": float(fd), "pass": ok}));
        }
    }
    Ok(RunOutput {
        results: json!({"rows": rows, "tolerance": float(tol), "floor": float(CONVEXITY_FLOOR)}),
        traces: vec![trace],
        pass,
    })
}
