//! Minimization of G ↦ M(FS(G), h_ref) over positive forms at a fixed level.
//!
//! Iterates are stored as factors U with G⁻¹ = UU†. In the coordinates
//! G = L e^{η} L† around the current point the gradient is
//! ĝ = ∫ Q(Λ̂ − μ)Q† ω, and a step η = −αĝ is a Bergman geodesic, so the
//! change of M along it is integrated exactly in closed form. Unstable
//! bundles make M unbounded below; the iterates then run off along a
//! direction whose weight filtration is the destabilizer.

use std::sync::Arc;

use num_rational::BigRational;
use num_traits::Zero;

use crate::asymptotics::weight_spec_from_eigen_snapped;
use crate::bundle::{BundleSpec, SharedMetric};
use crate::donaldson::{donaldson, FsPath, MetricPath, PathKind, PathSpec};
use crate::geometry::{potential, QuadratureRule};
use crate::linalg::{c, herm_eigen, hermitian_part, identity, inverse, op_norm, CMat};
use crate::quot::{filtration, FiltrationReport};
use crate::sections::{l2_gram, FsMetric, PositiveForm, SectionBasis};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub k: i64,
    pub max_iter: usize,
    /// Frobenius norm of the frame gradient ĝ.
    pub grad_tol: f64,
    /// Target for the sup HE residual.
    pub he_tol: f64,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub initial_step: f64,
    /// Cap on α. Along a divergent run the mixing directions between
    /// weight blocks keep O(1) curvature while the escape direction is
    /// flat, so an uncapped α turns the descent into an unstable explicit
    /// scheme in those directions.
    pub max_step: f64,
    /// Cap on the eigenvalue spread of one step η = −αĝ.
    pub max_step_spread: f64,
    /// Divergence is declared when ‖log G‖_op exceeds this and M drops
    /// below `divergence_mdon`.
    pub divergence_log_norm: f64,
    pub divergence_mdon: f64,
    pub quadrature: (usize, usize),
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            k: 2,
            max_iter: 2000,
            grad_tol: 1e-9,
            he_tol: 1e-6,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
            initial_step: 1.0,
            max_step: 1.5,
            max_step_spread: 20.0,
            divergence_log_norm: 40.0,
            divergence_mdon: -1e3,
            quadrature: (32, 32),
        }
    }
}

impl SolveOptions {
    pub fn validate(&self, spec: &BundleSpec) -> Result<()> {
        let mut problems = Vec::new();
        if self.k < spec.regularity() {
            problems.push(format!("k = {} is below the regularity {} of {spec}", self.k, spec.regularity()));
        }
        for (name, v) in [
            ("grad_tol", self.grad_tol),
            ("he_tol", self.he_tol),
            ("armijo_c1", self.armijo_c1),
            ("initial_step", self.initial_step),
            ("max_step", self.max_step),
            ("max_step_spread", self.max_step_spread),
            ("divergence_log_norm", self.divergence_log_norm),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                problems.push(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            problems.push(format!("backtrack must lie in (0, 1), got {}", self.backtrack));
        }
        if self.armijo_c1 >= 1.0 {
            problems.push("armijo_c1 must be below 1".into());
        }
        if !(self.divergence_mdon < 0.0) {
            problems.push("divergence_mdon must be negative".into());
        }
        if self.quadrature.0 < 4 || self.quadrature.1 < 4 {
            problems.push("quadrature sizes must be at least 4".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Argument(problems.join("; ")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    Diverging,
    MaxIter,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::Diverging => "diverging",
            SolveStatus::MaxIter => "maxiter",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub mdon: f64,
    pub he_residual: f64,
    pub grad_norm: f64,
    /// ‖log G‖_op relative to the initial form.
    pub log_norm: f64,
    pub step: f64,
}

/// Asymptotic direction of a divergent run: coefficient vectors (columns)
/// with weights normalized to zero mean and largest |weight| 1.
#[derive(Clone, Debug)]
pub struct ZetaLimit {
    pub weights: Vec<f64>,
    pub vectors: CMat,
}

impl ZetaLimit {
    /// V·diag(w)·V⁻¹.
    pub fn matrix(&self) -> Result<CMat> {
        Ok(&self.vectors * crate::linalg::real_diag(&self.weights) * inverse(&self.vectors)?)
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub basis: SectionBasis,
    /// U with G⁻¹ = UU† for the final iterate. Iterates keep the scale of
    /// the start, which keeps both ends of the spectrum in range.
    pub factor: CMat,
    /// s such that FS(U·s) meets the reference normalization.
    pub normalization: f64,
    pub he_residual_sup: f64,
    pub mdon_history: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub zeta_limit: Option<ZetaLimit>,
}

impl SolveResult {
    /// Final metric, scaled so that min over nodes of λ_min(h·h_ref⁻¹) = 1.
    pub fn metric(&self) -> Result<FsMetric> {
        FsMetric::from_factor(self.basis.clone(), &self.factor * c(self.normalization))
    }

    /// The final form G, when it is well enough conditioned to invert.
    pub fn g_final(&self) -> Result<CMat> {
        self.metric()?.gram()
    }
}

/// ĝ = ∫ Q(Λ̂ − μ)Q† ω: the gradient of M in the coordinates G = L e^{η} L†
/// with G⁻¹ = UU†, U the factor of `h`.
pub fn frame_gradient(h: &FsMetric, rule: &QuadratureRule) -> Result<CMat> {
    Ok(hermitian_part(&rule.reduce(|p, w| Ok(h.residual_projection(p)? * c(w)))?))
}

/// Hermitian g with Re tr(g·δ) = d/ds M(FS(e^{sδ}Ge^{sδ})) for hermitian δ.
/// With `project_trace` the multiple of Id is removed; it vanishes up to
/// quadrature error anyway because M ignores constant rescaling.
pub fn mdon_gradient(basis: &SectionBasis, g: &PositiveForm, rule: &QuadratureRule, project_trace: bool) -> Result<CMat> {
    let h = FsMetric::new(basis.clone(), g)?;
    let ghat = frame_gradient(&h, rule)?;
    let u = h.factor();
    let half = u * ghat * inverse(u)?;
    let mut out = &half + half.adjoint();
    if project_trace {
        let n = out.nrows();
        let mean = out.trace() / c(n as f64);
        out -= identity(n) * mean;
    }
    Ok(out)
}

fn trace_free(m: &CMat) -> CMat {
    let n = m.nrows();
    m - identity(n) * (m.trace() / c(n as f64))
}

fn spread(m: &CMat) -> f64 {
    let ev = crate::linalg::herm_eigenvalues(m);
    ev[ev.len() - 1] - ev[0]
}

/// max(2 log σ_max(W), 2 log σ_max(W⁻¹)) for W = U_init⁻¹U.
fn log_norm(u_init_inv: &CMat, u_init: &CMat, u: &CMat) -> f64 {
    let w = u_init_inv * u;
    let up = op_norm(&w).ln();
    let down = inverse(u).map(|ui| op_norm(&(ui * u_init)).ln()).unwrap_or(f64::INFINITY);
    2.0 * up.max(down)
}

/// Cholesky factors L of h_ref = LL† at the nodes.
fn reference_factors(h_ref: &SharedMetric, rule: &QuadratureRule) -> Result<Vec<CMat>> {
    rule.map(|p| crate::linalg::cholesky(&h_ref.at(p)?))
}

/// s such that FS(U·s) has min over nodes of λ_min(h·h_ref⁻¹) = 1. Uses
/// λ_min = e^{kφ}/σ_max(L†SU)², which needs no inversion of h.
fn reference_scale(basis: &SectionBasis, u: &CMat, ref_factors: &[CMat], rule: &QuadratureRule) -> Result<f64> {
    let k = basis.level() as f64;
    let mut least = f64::INFINITY;
    for (p, l) in rule.nodes().iter().zip(ref_factors) {
        let a = l.adjoint() * basis.eval_matrix(p.chart(), p.coord()) * u;
        let top = op_norm(&a);
        least = least.min((k * potential(p.coord())).exp() / (top * top));
    }
    if !(least > 0.0 && least.is_finite()) {
        return Err(Error::Numeric(format!("degenerate reference scale {least:e}")));
    }
    Ok(least.sqrt())
}

/// M(FS(G_init), h_ref), along a Bergman geodesic when h_ref is an FS
/// metric of the same level and pointwise otherwise.
fn initial_offset(h0: &FsMetric, h_ref: &SharedMetric, rule: &QuadratureRule) -> Result<f64> {
    let h0: SharedMetric = Arc::new(h0.clone());
    let kind = match h_ref.as_fs() {
        Some(f) if f.basis() == h0.as_fs().expect("FS").basis() => PathKind::Bergman,
        _ => PathKind::PointwiseExponential,
    };
    donaldson(
        &h0,
        h_ref,
        &PathSpec {
            kind,
            ..PathSpec::default()
        },
        rule,
    )
}

pub fn minimize(spec: &BundleSpec, opts: &SolveOptions, h_ref: &SharedMetric) -> Result<SolveResult> {
    opts.validate(spec)?;
    if h_ref.bundle() != spec {
        return Err(Error::Argument("reference metric lives on a different bundle".into()));
    }
    let basis = SectionBasis::new(spec.clone(), opts.k)?;
    let rule = QuadratureRule::new(opts.quadrature.0, opts.quadrature.1)?;
    let g_init = l2_gram(&basis, h_ref.as_ref(), &rule)?;
    minimize_from(&basis, opts, h_ref, &g_init)
}

pub fn minimize_from(
    basis: &SectionBasis,
    opts: &SolveOptions,
    h_ref: &SharedMetric,
    g_init: &PositiveForm,
) -> Result<SolveResult> {
    opts.validate(basis.bundle())?;
    if opts.k != basis.level() {
        return Err(Error::Argument("options and basis disagree on the level".into()));
    }
    let rule = QuadratureRule::new(opts.quadrature.0, opts.quadrature.1)?;
    let ref_factors = reference_factors(h_ref, &rule)?;
    let mut h = FsMetric::new(basis.clone(), g_init)?;
    let u_init = h.factor().clone();
    let u_init_inv = inverse(&u_init)?;
    let mut mdon = initial_offset(&h, h_ref, &rule)?;
    let mut step = opts.initial_step;
    let mut history = Vec::new();
    let mut steps: Vec<CMat> = Vec::new();
    let mut status = SolveStatus::MaxIter;
    let mut he_sup;
    let mut iter = 0;
    loop {
        let ghat = trace_free(&frame_gradient(&h, &rule)?);
        let grad_norm = ghat.norm();
        he_sup = h.he_residual_sup(&rule)?;
        let ln = log_norm(&u_init_inv, &u_init, h.factor());
        history.push(IterationRecord {
            iter,
            mdon,
            he_residual: he_sup,
            grad_norm,
            log_norm: ln,
            step,
        });
        if he_sup <= opts.he_tol && grad_norm <= opts.grad_tol {
            status = SolveStatus::Converged;
            break;
        }
        if ln > opts.divergence_log_norm && mdon < opts.divergence_mdon {
            status = SolveStatus::Diverging;
            break;
        }
        if iter >= opts.max_iter {
            break;
        }
        let sp = spread(&ghat).max(f64::MIN_POSITIVE);
        let mut alpha = (2.0 * step).min(opts.max_step).min(opts.max_step_spread / sp);
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let eta = &ghat * c(-alpha);
            let path = FsPath::from_direction(&h, &eta);
            let delta = MetricPath::Fs(path.clone()).integrate_rate(0.0, 1.0, 4, &rule)?;
            if delta <= -opts.armijo_c1 * alpha * grad_norm * grad_norm {
                accepted = Some((path.metric_at(1.0)?, delta));
                break;
            }
            alpha *= opts.backtrack;
        }
        match accepted {
            Some((next, delta)) => {
                // U_next = U·X with X = V·e^{−Λ/2} for −αĝ = VΛV†
                let (lambda, vecs) = herm_eigen(&(&ghat * c(-alpha)));
                let d: Vec<f64> = lambda.iter().map(|l| (-0.5 * l).exp()).collect();
                steps.push(vecs * crate::linalg::real_diag(&d));
                h = next;
                mdon += delta;
                step = alpha;
            }
            None if he_sup <= opts.he_tol => {
                // no further decrease is resolvable and the metric is HE
                status = SolveStatus::Converged;
                break;
            }
            None => {
                return Err(Error::Numeric(format!(
                    "line search failed at iteration {iter} with ‖ĝ‖ = {grad_norm:e}, HE residual {he_sup:e}, M = {mdon}"
                )));
            }
        }
        iter += 1;
    }
    let zeta_limit = if status == SolveStatus::Diverging {
        Some(tail_direction(h.factor(), &steps)?)
    } else {
        None
    };
    Ok(SolveResult {
        status,
        basis: basis.clone(),
        normalization: reference_scale(basis, h.factor(), &ref_factors, &rule)?,
        factor: h.factor().clone(),
        he_residual_sup: he_sup,
        mdon_history: history.iter().map(|r| r.mdon).collect(),
        history,
        zeta_limit,
    })
}

/// Log-spread of XX† that the tail window should reach.
const TAIL_SPREAD: f64 = 16.0;

/// Rates come from the last window U_last = U_j·X of the run: ½log of the
/// eigenvalues of XX†, centered and scaled to max |w| = 1. The flag is read
/// off the left singular vectors of U_last, whose dominant subspaces stay
/// accurate even when U_last itself is far out of range for inversion.
fn tail_direction(u_last: &CMat, steps: &[CMat]) -> Result<ZetaLimit> {
    if steps.is_empty() {
        return Err(Error::Numeric("no steps were taken".into()));
    }
    let n = u_last.nrows();
    let mut x = identity(n);
    for step in steps.iter().rev() {
        x = step * x;
        let ev = crate::linalg::herm_eigenvalues(&hermitian_part(&(&x * x.adjoint())));
        if ev[0] > 0.0 && (ev[n - 1] / ev[0]).ln() >= TAIL_SPREAD {
            break;
        }
    }
    let values = crate::linalg::herm_eigenvalues(&hermitian_part(&(&x * x.adjoint())));
    let mut rates: Vec<f64> = values.iter().rev().map(|v| 0.5 * v.max(f64::MIN_POSITIVE).ln()).collect();
    let mean = rates.iter().sum::<f64>() / n as f64;
    for r in &mut rates {
        *r -= mean;
    }
    let top = rates.iter().fold(0.0_f64, |a, r| a.max(r.abs()));
    if top == 0.0 {
        return Err(Error::Numeric("tail of the run has no preferred direction".into()));
    }
    for r in &mut rates {
        *r /= top;
    }
    let svd = u_last.clone().svd(true, false);
    let left = svd.u.ok_or_else(|| Error::Numeric("SVD failed".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut vectors = CMat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &left.column(i));
    }
    Ok(ZetaLimit { weights: rates, vectors })
}

/// Continued-fraction rounding of the divergent direction followed by the
/// exact filtration.
pub const DESTABILIZER_MAX_DEN: i64 = 64;
pub const DESTABILIZER_TOL: f64 = 1e-4;
/// Largest projector move allowed when snapping an eigenspace.
pub const DESTABILIZER_MAX_GAP: f64 = 1e-2;

pub fn destabilizer_extract(result: &SolveResult, spec: &BundleSpec, k: i64) -> Result<FiltrationReport> {
    if result.status != SolveStatus::Diverging {
        return Err(Error::Precondition(format!(
            "destabilizer extraction needs a diverging run, got {}",
            result.status.name()
        )));
    }
    let limit = result
        .zeta_limit
        .as_ref()
        .ok_or_else(|| Error::Precondition("diverging run carries no limit direction".into()))?;
    let (zeta, _) = weight_spec_from_eigen_snapped(
        k,
        &limit.weights,
        &limit.vectors,
        DESTABILIZER_MAX_DEN,
        DESTABILIZER_TOL,
        DESTABILIZER_MAX_GAP,
    )
    .map_err(|e| Error::Numeric(format!("{e}; a longer divergent run may sharpen the direction")))?;
    let report = filtration(spec, &zeta)?;
    if report.jna == BigRational::zero() {
        return Err(Error::Numeric(
            "rounded direction gives a trivial filtration; a longer divergent run may sharpen it".into(),
        ));
    }
    Ok(report)
}
