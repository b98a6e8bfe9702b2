//! Quick end-to-end checks with answers known in closed form, run by
//! `he --self-test`.

use std::sync::Arc;

use num_rational::BigRational;
use serde_json::Value;

use hermitian_einstein::bundle::{delta_boundedness, scale_normalize, BundleSpec, MetricField, ScaledMetric, SharedMetric, StandardMetric};
use hermitian_einstein::donaldson::{c_delta, donaldson, PathKind, PathSpec};
use hermitian_einstein::geometry::{integrate_real, QuadratureRule, SpherePoint};
use hermitian_einstein::linalg::{herm_exp, max_abs_diff, random_hermitian, scale};
use hermitian_einstein::quot::poly::ratio;
use hermitian_einstein::quot::{filtration, j_of, slope_gap_constant, stability_classify, Stability, WeightSpec};
use hermitian_einstein::sections::{fs_metric, PositiveForm, SectionBasis};
use hermitian_einstein::solver::{destabilizer_extract, minimize, SolveOptions, SolveStatus};
use hermitian_einstein::Error;

use crate::commands::{run, Command};
use crate::config::{parse_str, ConfigError};

type Check = fn() -> Result<(), String>;

pub const CHECKS: &[(&str, Check)] = &[
    ("total mass is one", total_mass),
    ("sections of O(2) span three dimensions", section_count),
    ("O(-1) has no sections at level 0", negative_level_rejected),
    ("j of integer and half-integer weights", j_values),
    ("slope gap needs rank two", slope_gap_rank_one),
    ("stability of O(3) and O(1)+O(-1)", stability),
    ("scalar weights give a trivial filtration", scalar_filtration),
    ("flat metric has zero curvature", flat_curvature),
    ("Gram scaling scales the metric", gram_scaling),
    ("Donaldson functional vanishes on the diagonal", mdon_diagonal),
    ("scale normalization recovers the factor", scale_factor),
    ("proportional metrics are 1-bounded", proportional_delta),
    ("C(1) is one half", c_delta_at_one),
    ("config round trip", config_round_trip),
    ("missing bundle is named", missing_bundle),
    ("mna command on O(1)+O(-1)", mna_command),
    ("bergman command on O(0) at level 5", bergman_command),
    ("destabilizer refuses a converged run", destabilizer_precondition),
];

pub struct Outcome {
    pub name: &'static str,
    pub error: Option<String>,
}

pub fn run_all() -> Vec<Outcome> {
    CHECKS
        .iter()
        .map(|(name, check)| Outcome {
            name,
            error: check().err(),
        })
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn spec(degrees: &[i64]) -> Result<BundleSpec, String> {
    BundleSpec::new(degrees.to_vec()).map_err(|e| e.to_string())
}

fn rule(n: usize) -> Result<QuadratureRule, String> {
    QuadratureRule::new(n, n).map_err(|e| e.to_string())
}

fn sample_points() -> Vec<SpherePoint> {
    [(0.3, -0.2), (1.7, 0.9), (-4.0, 2.5)]
        .iter()
        .map(|(re, im)| SpherePoint::from_z(num_complex::Complex64::new(*re, *im)).expect("finite point"))
        .chain([SpherePoint::infinity()])
        .collect()
}

fn total_mass() -> Result<(), String> {
    let mass = integrate_real(&rule(24)?, |_| 1.0).map_err(|e| e.to_string())?;
    ensure((mass - 1.0).abs() < 1e-12, || format!("mass {mass}"))
}

fn section_count() -> Result<(), String> {
    let b = SectionBasis::new(spec(&[0])?, 2).map_err(|e| e.to_string())?;
    ensure(b.dim() == 3, || format!("dimension {}", b.dim()))
}

fn negative_level_rejected() -> Result<(), String> {
    ensure(SectionBasis::new(spec(&[1, -1])?, 0).is_err(), || "level 0 accepted".into())
}

fn j_values() -> Result<(), String> {
    let a = j_of(&[ratio(1, 1), ratio(-3, 1)]);
    let b = j_of(&[ratio(1, 2), ratio(-1, 2)]);
    ensure(a == 1.into() && b == 2.into(), || format!("got {a} and {b}"))
}

fn slope_gap_rank_one() -> Result<(), String> {
    ensure(matches!(slope_gap_constant(&spec(&[3])?), Err(Error::Argument(_))), || {
        "rank 1 accepted".into()
    })
}

fn stability() -> Result<(), String> {
    let a = stability_classify(&spec(&[3])?);
    let b = stability_classify(&spec(&[1, -1])?);
    ensure(a == Stability::Stable && b == Stability::Unstable, || {
        format!("{} and {}", a.name(), b.name())
    })
}

fn scalar_filtration() -> Result<(), String> {
    let b = SectionBasis::new(spec(&[1, -1])?, 1).map_err(|e| e.to_string())?;
    let rep = filtration(b.bundle(), &WeightSpec::scalar(&b, ratio(7, 3))).map_err(|e| e.to_string())?;
    let zero = BigRational::from_integer(0.into());
    ensure(rep.mna == zero && rep.jna == zero, || format!("M {} J {}", rep.mna, rep.jna))
}

fn flat_curvature() -> Result<(), String> {
    let h = StandardMetric::new(spec(&[0, 0])?);
    for p in sample_points() {
        let f = h.lambda_curvature(p.chart(), p.coord()).map_err(|e| e.to_string())?;
        let size = f.iter().fold(0.0_f64, |a, x| a.max(x.norm()));
        ensure(size < 1e-6, || format!("curvature {size:.3e}"))?;
    }
    Ok(())
}

fn random_gram(n: usize) -> Result<PositiveForm, String> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    PositiveForm::new(herm_exp(&random_hermitian(n, 0.5, &mut rng))).map_err(|e| e.to_string())
}

fn gram_scaling() -> Result<(), String> {
    let b = SectionBasis::new(spec(&[2, 0])?, 2).map_err(|e| e.to_string())?;
    let g = random_gram(b.dim())?;
    let g3 = PositiveForm::new(scale(g.matrix(), 3.0)).map_err(|e| e.to_string())?;
    let h = fs_metric(&b, &g).map_err(|e| e.to_string())?;
    let h3 = fs_metric(&b, &g3).map_err(|e| e.to_string())?;
    for p in sample_points() {
        let a = scale(&h.at(&p).map_err(|e| e.to_string())?, 3.0);
        let c = h3.at(&p).map_err(|e| e.to_string())?;
        let gap = max_abs_diff(&a, &c) / c.norm();
        ensure(gap < 1e-12, || format!("relative gap {gap:.3e}"))?;
    }
    Ok(())
}

fn fs_metric_on(degrees: &[i64], k: i64) -> Result<SharedMetric, String> {
    let b = SectionBasis::new(spec(degrees)?, k).map_err(|e| e.to_string())?;
    let g = random_gram(b.dim())?;
    Ok(Arc::new(fs_metric(&b, &g).map_err(|e| e.to_string())?))
}

fn mdon_diagonal() -> Result<(), String> {
    let h = fs_metric_on(&[1, -1], 2)?;
    let path = PathSpec {
        kind: PathKind::Bergman,
        t_order: 8,
    };
    let m = donaldson(&h, &h, &path, &rule(16)?).map_err(|e| e.to_string())?;
    ensure(m.abs() < 1e-12, || format!("M(h, h) = {m:.3e}"))
}

fn scale_factor() -> Result<(), String> {
    let h = fs_metric_on(&[3], 3)?;
    let h3: SharedMetric = Arc::new(ScaledMetric::new(h.clone(), 3.0).map_err(|e| e.to_string())?);
    let (_, factor) = scale_normalize(h3, h.as_ref(), &rule(12)?).map_err(|e| e.to_string())?;
    ensure((factor - 3.0).abs() < 1e-12, || format!("factor {factor}"))
}

fn proportional_delta() -> Result<(), String> {
    let h = fs_metric_on(&[2, 2], 2)?;
    let h5 = ScaledMetric::new(h.clone(), 5.0).map_err(|e| e.to_string())?;
    let d = delta_boundedness(&h5, h.as_ref(), &rule(12)?).map_err(|e| e.to_string())?;
    ensure((d - 1.0).abs() < 1e-12, || format!("δ = {d}"))
}

fn c_delta_at_one() -> Result<(), String> {
    let v = c_delta(1.0).map_err(|e| e.to_string())?;
    ensure((v - 0.5).abs() < 1e-15, || format!("C(1) = {v}"))
}

const MNA_CONFIG: &str = r#"{
    "bundle": [1, -1],
    "k": 1,
    "zeta": {"summand_weights": ["1", "-3"]}
}"#;

fn config_round_trip() -> Result<(), String> {
    let cfg = parse_str(MNA_CONFIG).map_err(|e| e.to_string())?;
    let text = serde_json::to_string(&cfg.to_json()).map_err(|e| e.to_string())?;
    let again = parse_str(&text).map_err(|e| e.to_string())?;
    ensure(again == cfg && again.to_json() == cfg.to_json(), || "round trip changed the config".into())
}

fn missing_bundle() -> Result<(), String> {
    match parse_str(r#"{"k": 2}"#) {
        Err(ConfigError::Schema(list)) if list.iter().any(|m| m.starts_with("$.bundle")) => Ok(()),
        other => Err(format!("unexpected outcome {other:?}")),
    }
}

fn mna_command() -> Result<(), String> {
    let cfg = parse_str(MNA_CONFIG).map_err(|e| e.to_string())?;
    let out = run(Command::Mna, &cfg).map_err(|e| e.to_string())?;
    let mna = &out.results["mna"];
    ensure(mna == &Value::String("-8".into()), || format!("mna {mna}"))
}

fn bergman_command() -> Result<(), String> {
    let cfg = parse_str(r#"{"bundle": [0], "k": 5, "quadrature": {"n_colat": 24, "n_angle": 24}}"#)
        .map_err(|e| e.to_string())?;
    let out = run(Command::Bergman, &cfg).map_err(|e| e.to_string())?;
    let csv = out.traces.first().ok_or("no trace")?.render();
    let row = csv.lines().nth(1).ok_or("empty trace")?;
    let mut cells = row.split(',');
    let k = cells.next().unwrap_or("");
    let dev: f64 = cells.next().and_then(|s| s.parse().ok()).ok_or("unreadable deviation")?;
    ensure(k == "5" && dev < 1e-8, || format!("row {row}"))
}

fn destabilizer_precondition() -> Result<(), String> {
    let s = spec(&[1])?;
    let opts = SolveOptions {
        k: 1,
        quadrature: (12, 12),
        ..SolveOptions::default()
    };
    let h_ref: SharedMetric = Arc::new(StandardMetric::new(s.clone()));
    let res = minimize(&s, &opts, &h_ref).map_err(|e| e.to_string())?;
    ensure(res.status == SolveStatus::Converged, || format!("status {}", res.status.name()))?;
    match destabilizer_extract(&res, &s, 1) {
        Err(Error::Precondition(_)) => Ok(()),
        other => Err(format!("unexpected outcome {:?}", other.map(|r| r.mna))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes() {
        let failed: Vec<String> = run_all()
            .into_iter()
            .filter_map(|o| o.error.map(|e| format!("{}: {e}", o.name)))
            .collect();
        assert!(failed.is_empty(), "{failed:#?}");
    }
}
