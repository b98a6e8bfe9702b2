//! The Donaldson functional M(h1, h0) = ∫₀¹∫ tr(h⁻¹ḣ(Λ_ωF − μ)) ω dt and
//! its first and second variations.
//!
//! Paths between FS metrics are kept inside the FS family, where ḣ and the
//! curvature are closed form. Other paths are pointwise exponentials
//! h_t = h0·e^{tv} with curvature by finite differences.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::bundle::{
    selfadjoint_part, stencil, FieldFn, GeodesicMetric, MetricField, PointwiseExpMetric, SharedMetric,
};
use crate::geometry::{contraction_factor, gauss_legendre_interval, Chart, QuadratureRule, SpherePoint, VOLUME};
use crate::linalg::{c, herm_apply, herm_eigen, herm_exp, herm_log, identity, inverse, max_abs_diff, CMat, C64};
use crate::sections::{FsMetric, PositiveForm, SectionBasis};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathKind {
    /// Geodesic of Gram forms, G_t = G0^{1/2}(G0^{−1/2}G1G0^{−1/2})^t G0^{1/2}.
    Bergman,
    /// h_t = h0·exp(t·log(h0⁻¹h1)) pointwise.
    PointwiseExponential,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathSpec {
    pub kind: PathKind,
    /// Initial Gauss–Legendre order in t; doubled until the value settles.
    pub t_order: usize,
}

impl Default for PathSpec {
    fn default() -> Self {
        PathSpec {
            kind: PathKind::Bergman,
            t_order: 16,
        }
    }
}

const T_TOL: f64 = 1e-8;
const T_MAX_ORDER: usize = 256;

#[derive(Clone, Debug)]
enum FsPathKind {
    /// U_t = U0·V·e^{−tΛ/2}, Ξ = −Λ.
    Geodesic { base: CMat, lambda: Vec<f64> },
    /// U_t = e^{ζt}U0 and Ξ = U0⁻¹ζU0 + U0†ζU0^{−†}.
    Ray { u0: CMat, zeta: CMat, xi: CMat },
}

/// A path t ↦ FS(G_t) described by a factor U_t with G_t⁻¹ = U_tU_t† and
/// d/dt(G_t⁻¹) = U_t Ξ_t U_t†.
#[derive(Clone, Debug)]
pub struct FsPath {
    basis: SectionBasis,
    kind: FsPathKind,
}

impl FsPath {
    pub fn between(h0: &FsMetric, h1: &FsMetric) -> Result<Self> {
        if h0.basis() != h1.basis() {
            return Err(Error::Argument("FS endpoints must share bundle and level".into()));
        }
        // U0†G1U0 = (WW†)⁻¹ with W = U0⁻¹U1
        let w = inverse(h0.factor())? * h1.factor();
        let eta = -herm_log(&(&w * w.adjoint()))?;
        Ok(FsPath::from_direction(h0, &eta))
    }

    /// The geodesic from h0 towards the form G1 with U0†G1U0 = e^{η}.
    pub fn from_direction(h0: &FsMetric, eta: &CMat) -> Self {
        let (lambda, vecs) = herm_eigen(eta);
        FsPath {
            basis: h0.basis().clone(),
            kind: FsPathKind::Geodesic {
                base: h0.factor() * vecs,
                lambda,
            },
        }
    }

    /// G_t = e^{−ζt}G0e^{−ζt}.
    pub fn ray(basis: &SectionBasis, g0: &PositiveForm, zeta: &CMat) -> Result<Self> {
        let h0 = FsMetric::new(basis.clone(), g0)?;
        let u0 = h0.factor().clone();
        let u0_inv = inverse(&u0)?;
        let zeta = crate::linalg::hermitian_part(zeta);
        let xi = &u0_inv * &zeta * &u0 + u0.adjoint() * &zeta * u0_inv.adjoint();
        Ok(FsPath {
            basis: basis.clone(),
            kind: FsPathKind::Ray { u0, zeta, xi },
        })
    }

    pub fn basis(&self) -> &SectionBasis {
        &self.basis
    }

    pub fn metric_at(&self, t: f64) -> Result<FsMetric> {
        let factor = match &self.kind {
            FsPathKind::Geodesic { base, lambda } => {
                let d: Vec<f64> = lambda.iter().map(|l| (-0.5 * t * l).exp()).collect();
                base * crate::linalg::real_diag(&d)
            }
            FsPathKind::Ray { u0, zeta, .. } => herm_apply(zeta, |x| (x * t).exp()) * u0,
        };
        FsMetric::from_factor(self.basis.clone(), factor)
    }

    pub fn xi_at(&self, _t: f64) -> CMat {
        match &self.kind {
            FsPathKind::Geodesic { lambda, .. } => -crate::linalg::real_diag(lambda),
            FsPathKind::Ray { xi, .. } => xi.clone(),
        }
    }
}

/// h_t = h0·e^{tv} for an h0-selfadjoint field v.
#[derive(Clone)]
pub struct PointwisePath {
    h0: SharedMetric,
    v: FieldFn,
}

impl PointwisePath {
    pub fn new(h0: SharedMetric, v: FieldFn) -> Self {
        PointwisePath { h0, v }
    }

    /// The geodesic from h0 to h1.
    pub fn between(h0: SharedMetric, h1: SharedMetric) -> Result<Self> {
        let g = GeodesicMetric::new(h0.clone(), h1, 0.0)?;
        let v: FieldFn = Arc::new(move |chart, coord| g.velocity(chart, coord));
        Ok(PointwisePath { h0, v })
    }
}

#[derive(Clone)]
pub enum MetricPath {
    Fs(FsPath),
    Pointwise(PointwisePath),
}

impl MetricPath {
    pub fn from_spec(h0: &SharedMetric, h1: &SharedMetric, spec: &PathSpec) -> Result<Self> {
        if h0.bundle() != h1.bundle() {
            return Err(Error::Argument("metrics live on different bundles".into()));
        }
        match (spec.kind, h0.as_fs(), h1.as_fs()) {
            (PathKind::Bergman, Some(a), Some(b)) if a.basis() == b.basis() => {
                Ok(MetricPath::Fs(FsPath::between(a, b)?))
            }
            (PathKind::Bergman, _, _) => Err(Error::Argument(
                "a Bergman path needs two FS metrics at the same level".into(),
            )),
            (PathKind::PointwiseExponential, _, _) => {
                Ok(MetricPath::Pointwise(PointwisePath::between(h0.clone(), h1.clone())?))
            }
        }
    }

    pub fn bundle(&self) -> &crate::bundle::BundleSpec {
        match self {
            MetricPath::Fs(p) => p.basis.bundle(),
            MetricPath::Pointwise(p) => p.h0.bundle(),
        }
    }

    pub fn metric_at(&self, t: f64) -> Result<SharedMetric> {
        Ok(match self {
            MetricPath::Fs(p) => Arc::new(p.metric_at(t)?),
            MetricPath::Pointwise(p) => Arc::new(PointwiseExpMetric::new(p.h0.clone(), p.v.clone(), t)),
        })
    }

    /// v_t = h_t⁻¹∂_t h_t at a point.
    pub fn velocity(&self, t: f64, chart: Chart, coord: C64) -> Result<CMat> {
        match self {
            MetricPath::Fs(p) => p.metric_at(t)?.velocity(&p.xi_at(t), chart, coord),
            MetricPath::Pointwise(p) => (p.v)(chart, coord),
        }
    }

    /// ∂_c v_t at a point.
    pub fn velocity_dz(&self, t: f64, chart: Chart, coord: C64) -> Result<CMat> {
        match self {
            MetricPath::Fs(p) => p.metric_at(t)?.velocity_derivative(&p.xi_at(t), chart, coord),
            MetricPath::Pointwise(p) => Ok(stencil(|ch, z| (p.v)(ch, z), chart, coord, false)?.dz),
        }
    }

    /// d/dt M(h_t, h_0) = ∫ tr(v_t(Λ_ωF_t − μ)) ω.
    pub fn rate(&self, t: f64, rule: &QuadratureRule) -> Result<f64> {
        let mu = self.bundle().slope_f64() / VOLUME;
        match self {
            MetricPath::Fs(p) => {
                let h = p.metric_at(t)?;
                let xi = p.xi_at(t);
                rule.reduce(|q, w| Ok(w * h.rate_density(&xi, q)?))
            }
            MetricPath::Pointwise(p) => {
                let h = PointwiseExpMetric::new(p.h0.clone(), p.v.clone(), t);
                let r = self.bundle().rank();
                rule.reduce(|q, w| {
                    let lf = h.lambda_curvature(q.chart(), q.coord())? - identity(r) * c(mu);
                    let v = (p.v)(q.chart(), q.coord())?;
                    Ok(w * (v * lf).trace().re)
                })
            }
        }
        .map_err(|e| annotate_t(e, t))
    }

    /// ∫_a^b rate dt with Gauss–Legendre order doubling.
    pub fn integrate_rate(&self, a: f64, b: f64, order: usize, rule: &QuadratureRule) -> Result<f64> {
        integrate_t(|t| self.rate(t, rule), a, b, order)
    }
}

fn annotate_t(e: Error, t: f64) -> Error {
    match e {
        Error::Evaluation { location, reason } => Error::Evaluation {
            location: format!("t = {t}, {location}"),
            reason,
        },
        other => other,
    }
}

fn integrate_t<F: Fn(f64) -> Result<f64>>(f: F, a: f64, b: f64, order: usize) -> Result<f64> {
    if order < 4 {
        return Err(Error::Argument(format!("t-quadrature order must be at least 4, got {order}")));
    }
    let once = |n: usize| -> Result<f64> {
        let (ts, ws) = gauss_legendre_interval(n, a, b);
        let mut acc = 0.0;
        for (t, w) in ts.iter().zip(&ws) {
            acc += w * f(*t)?;
        }
        Ok(acc)
    };
    let mut n = order;
    let mut prev = once(n)?;
    while n < T_MAX_ORDER {
        n *= 2;
        let next = once(n)?;
        if (next - prev).abs() < T_TOL {
            return Ok(next);
        }
        prev = next;
    }
    Ok(prev)
}

/// M(h1, h0).
pub fn donaldson(h1: &SharedMetric, h0: &SharedMetric, path: &PathSpec, rule: &QuadratureRule) -> Result<f64> {
    let p = MetricPath::from_spec(h0, h1, path)?;
    p.integrate_rate(0.0, 1.0, path.t_order, rule)
}

/// |M(h2,h0) − M(h2,h1) − M(h1,h0)|.
pub fn cocycle_defect(
    h2: &SharedMetric,
    h1: &SharedMetric,
    h0: &SharedMetric,
    path: &PathSpec,
    rule: &QuadratureRule,
) -> Result<f64> {
    let m20 = donaldson(h2, h0, path, rule)?;
    let m21 = donaldson(h2, h1, path, rule)?;
    let m10 = donaldson(h1, h0, path, rule)?;
    Ok((m20 - m21 - m10).abs())
}

pub fn geodesic(h0: SharedMetric, h1: SharedMetric, s: f64) -> Result<GeodesicMetric> {
    GeodesicMetric::new(h0, h1, s)
}

/// max over points of ‖∂_s(h_s⁻¹∂_s h_s)‖ by nested finite differences.
pub fn geodesic_residual(g: &GeodesicMetric, points: &[SpherePoint]) -> Result<f64> {
    let s = g.parameter();
    let mut worst = 0.0_f64;
    for p in points {
        let v_at = |s: f64| -> Result<CMat> { fd_velocity(g, s, p) };
        let d = 1e-2;
        let dv = (v_at(s + d)? - v_at(s - d)?) * c(0.5 / d);
        worst = worst.max(dv.iter().fold(0.0_f64, |a, x| a.max(x.norm())));
    }
    Ok(worst)
}

/// h_s⁻¹∂_s h_s by a fourth-order difference in s.
pub fn fd_velocity(g: &GeodesicMetric, s: f64, p: &SpherePoint) -> Result<CMat> {
    let e = 1e-3;
    let at = |s: f64| g.at_parameter(s).at(p);
    let dh = (at(s - 2.0 * e)? - at(s + 2.0 * e)? + (at(s + e)? - at(s - e)?) * c(8.0)) * c(1.0 / (12.0 * e));
    Ok(inverse(&at(s)?)? * dh)
}

/// d/dt M along the path at t.
pub fn first_derivative(path: &MetricPath, t: f64, rule: &QuadratureRule) -> Result<f64> {
    path.rate(t, rule)
}

#[derive(Clone, Copy, Debug)]
pub struct SecondDerivative {
    pub formula: f64,
    pub fd: f64,
}

/// d²/ds² M(h_s, h0) along the geodesic h_s = h0·e^{sv}: the closed
/// expression ∫ Re tr(∂̄v · e^{−sv}(∂v + [A0, v])e^{sv}) (1+|c|²)² ω against
/// a Richardson-extrapolated second difference of M.
pub fn second_derivative_geodesic(
    h0: &SharedMetric,
    h1: &SharedMetric,
    s: f64,
    rule: &QuadratureRule,
) -> Result<SecondDerivative> {
    let g = GeodesicMetric::new(h0.clone(), h1.clone(), 0.0)?;
    let formula = rule.reduce(|p, w| {
        let (chart, coord) = (p.chart(), p.coord());
        let st = stencil(|ch, z| g.velocity(ch, z), chart, coord, false)?;
        let v = st.value;
        let a0 = h0.connection(chart, coord)?;
        let cov = &st.dz + &a0 * &v - &v * &a0;
        let e_plus = g.exp_velocity(s, chart, coord)?;
        let e_minus = inverse(&e_plus)?;
        let moved = e_minus * cov * e_plus;
        Ok(w * contraction_factor(coord) * (st.dzbar * moved).trace().re)
    })?;
    let path = MetricPath::Pointwise(PointwisePath::between(h0.clone(), h1.clone())?);
    let second_diff = |eps: f64| -> Result<f64> {
        let upper = integrate_fixed(|t| path.rate(t, rule), s, s + eps, 4)?;
        let lower = integrate_fixed(|t| path.rate(t, rule), s - eps, s, 4)?;
        Ok((upper - lower) / (eps * eps))
    };
    let eps = 0.05;
    let fine = second_diff(eps)?;
    let coarse = second_diff(2.0 * eps)?;
    Ok(SecondDerivative {
        formula,
        fd: (4.0 * fine - coarse) / 3.0,
    })
}

fn integrate_fixed<F: Fn(f64) -> Result<f64>>(f: F, a: f64, b: f64, n: usize) -> Result<f64> {
    let (ts, ws) = gauss_legendre_interval(n, a, b);
    let mut acc = 0.0;
    for (t, w) in ts.iter().zip(&ws) {
        acc += w * f(*t)?;
    }
    Ok(acc)
}

/// sup over points of |∂_tΛ_ωF − (−(1+|c|²)²∂̄(∂v + [A, v]))|, with ∂_t by
/// finite differences in t.
pub fn curvature_variation_check(path: &MetricPath, t: f64, points: &[SpherePoint]) -> Result<f64> {
    let dt = 1e-3;
    let metrics: Vec<SharedMetric> = [-2.0, -1.0, 1.0, 2.0]
        .iter()
        .map(|k| path.metric_at(t + k * dt))
        .collect::<Result<_>>()?;
    let h = path.metric_at(t)?;
    let mut worst = 0.0_f64;
    for p in points {
        let (chart, coord) = (p.chart(), p.coord());
        let lf: Vec<CMat> = metrics
            .iter()
            .map(|m| m.lambda_curvature(chart, coord))
            .collect::<Result<_>>()?;
        let lhs = (&lf[0] - &lf[3] + (&lf[2] - &lf[1]) * c(8.0)) * c(1.0 / (12.0 * dt));
        let field = |ch: Chart, z: C64| -> Result<CMat> {
            let v = path.velocity(t, ch, z)?;
            let dv = path.velocity_dz(t, ch, z)?;
            let a = h.connection(ch, z)?;
            Ok(dv + &a * &v - &v * &a)
        };
        let st = stencil(field, chart, coord, false)?;
        let rhs = st.dzbar * c(-contraction_factor(coord));
        worst = worst.max(max_abs_diff(&lhs, &rhs));
    }
    Ok(worst)
}

/// (δ − 1 − ln δ)/(ln δ)², with its limit ½ at δ = 1.
pub fn c_delta(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Argument(format!("δ must lie in (0, 1], got {delta}")));
    }
    let x = delta.ln();
    if x.abs() < 1e-3 {
        // e^x − 1 − x = x²/2 + x³/6 + x⁴/24 + …
        return Ok(0.5 + x / 6.0 + x * x / 24.0 + x * x * x / 120.0);
    }
    Ok((x.exp_m1() - x) / (x * x))
}

/// ‖Λ_ωF − μ/Vol·Id‖ in L².
pub fn he_defect_norm(h0: SharedMetric, rule: &QuadratureRule) -> Result<f64> {
    Ok(crate::bundle::he_residual(h0, rule)?.l2)
}

#[derive(Clone, Debug)]
pub struct PoincareReport {
    /// 1/λ₁ from the richest trial space.
    pub constant: f64,
    pub lambda1: f64,
    /// (harmonic degree, 1/λ₁) for each trial space tried.
    pub history: Vec<(usize, f64)>,
    /// Last enrichment changed the estimate by less than 1%.
    pub stable: bool,
}

/// Real polynomial harmonics on the unit sphere up to `degree`, written as
/// monomials in the unit vector (x, y, h), with their ∂_c derivatives in
/// the chart of the point.
fn sphere_monomials(degree: usize, p: &SpherePoint) -> (Vec<f64>, Vec<C64>) {
    let cc = p.coord();
    let t = 1.0 + cc.norm_sqr();
    let xi = cc * (2.0 / t);
    let dxi = C64::new(2.0 / (t * t), 0.0);
    let dxi_bar = -(cc.conj() * cc.conj()) * (2.0 / (t * t));
    let dh = -cc.conj() * (2.0 / (t * t));
    let x = xi.re;
    let mut y = xi.im;
    let mut h = (1.0 - cc.norm_sqr()) / t;
    let dx = (dxi + dxi_bar) * 0.5;
    let mut dy = (dxi - dxi_bar) * C64::new(0.0, -0.5);
    let mut dhh = dh;
    if p.chart() == Chart::W {
        y = -y;
        h = -h;
        dy = -dy;
        dhh = -dhh;
    }
    let mut vals = Vec::new();
    let mut ders = Vec::new();
    for total in 1..=degree {
        for a in 0..=total {
            for b in 0..=(total - a) {
                let e = total - a - b;
                let pw = |base: f64, n: usize| if n == 0 { 1.0 } else { base.powi(n as i32) };
                let dpw = |base: f64, n: usize| if n == 0 { 0.0 } else { n as f64 * base.powi(n as i32 - 1) };
                let (fx, fy, fh) = (pw(x, a), pw(y, b), pw(h, e));
                vals.push(fx * fy * fh);
                ders.push(dx * (dpw(x, a) * fy * fh) + dy * (fx * dpw(y, b) * fh) + dhh * (fx * fy * dpw(h, e)));
            }
        }
    }
    (vals, ders)
}

/// Rayleigh–Ritz for the first nonzero eigenvalue of ∇*∇ on h0-selfadjoint
/// endomorphisms with vanishing mean, trial fields h0^{−1/2}(g·E)h0^{1/2}
/// for mean-zero harmonics g up to `max_degree` and hermitian E commuting
/// with the degree grading. Returns 1/λ₁.
pub fn poincare_constant(h0: &SharedMetric, rule: &QuadratureRule, max_degree: usize) -> Result<PoincareReport> {
    if max_degree < 1 {
        return Err(Error::Argument("trial degree must be at least 1".into()));
    }
    let degrees = h0.bundle().degrees().to_vec();
    let r = degrees.len();
    let mut mats = Vec::new();
    for i in 0..r {
        for j in i..r {
            if degrees[i] != degrees[j] {
                continue;
            }
            if i == j {
                let mut m = CMat::zeros(r, r);
                m[(i, i)] = c(1.0);
                mats.push(m);
            } else {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let mut m = CMat::zeros(r, r);
                m[(i, j)] = c(s);
                m[(j, i)] = c(s);
                mats.push(m.clone());
                let mut m = CMat::zeros(r, r);
                m[(i, j)] = C64::new(0.0, -s);
                m[(j, i)] = C64::new(0.0, s);
                mats.push(m);
            }
        }
    }
    let per_node: Vec<NodeData> = rule.map(|p| node_data(h0.as_ref(), p, max_degree))?;
    let mut history = Vec::new();
    for degree in 1..=max_degree {
        let count = (1..=degree).map(|d| (d + 1) * (d + 2) / 2).sum::<usize>();
        let lam = ritz_lambda1(&per_node, rule.weights(), &mats, count)?;
        history.push((degree, 1.0 / lam));
    }
    let last = history[history.len() - 1].1;
    let stable = history.len() >= 2 && {
        let prev = history[history.len() - 2].1;
        ((last - prev) / last).abs() < 0.01
    };
    Ok(PoincareReport {
        constant: last,
        lambda1: 1.0 / last,
        history,
        stable,
    })
}

struct NodeData {
    values: Vec<f64>,
    derivs: Vec<C64>,
    h_half: CMat,
    h_inv_half: CMat,
    dh_half: CMat,
    dh_inv_half: CMat,
    conn: CMat,
    h: CMat,
    weight_factor: f64,
}

fn node_data(h0: &dyn MetricField, p: &SpherePoint, degree: usize) -> Result<NodeData> {
    let (values, derivs) = sphere_monomials(degree, p);
    let (chart, coord) = (p.chart(), p.coord());
    let half = stencil(|ch, z| crate::linalg::herm_sqrt(&h0.eval(ch, z)?), chart, coord, false)?;
    let inv_half = stencil(|ch, z| crate::linalg::herm_inv_sqrt(&h0.eval(ch, z)?), chart, coord, false)?;
    Ok(NodeData {
        values,
        derivs,
        h_half: half.value,
        h_inv_half: inv_half.value,
        dh_half: half.dz,
        dh_inv_half: inv_half.dz,
        conn: h0.connection(chart, coord)?,
        h: h0.eval(chart, coord)?,
        weight_factor: contraction_factor(coord),
    })
}

fn ritz_lambda1(nodes: &[NodeData], weights: &[f64], mats: &[CMat], count: usize) -> Result<f64> {
    // orthonormalize mean-zero scalar functions in L²(ω)
    let mean: Vec<f64> = (0..count)
        .map(|i| nodes.iter().zip(weights).map(|(n, w)| w * n.values[i]).sum())
        .collect();
    let mut gram = DMatrix::<f64>::zeros(count, count);
    for (n, w) in nodes.iter().zip(weights) {
        for i in 0..count {
            for j in 0..count {
                gram[(i, j)] += w * (n.values[i] - mean[i]) * (n.values[j] - mean[j]);
            }
        }
    }
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let keep: Vec<usize> = (0..count).filter(|&i| eig.eigenvalues[i] > 1e-10 * top).collect();
    let basis: Vec<Vec<f64>> = keep
        .iter()
        .map(|&i| {
            let s = 1.0 / eig.eigenvalues[i].sqrt();
            (0..count).map(|j| eig.eigenvectors[(j, i)] * s).collect()
        })
        .collect();
    let nf = basis.len() * mats.len();
    let mut stiff = DMatrix::<f64>::zeros(nf, nf);
    let mut mass = DMatrix::<f64>::zeros(nf, nf);
    for (n, w) in nodes.iter().zip(weights) {
        let hinv = inverse(&n.h)?;
        let mut fields = Vec::with_capacity(nf);
        let mut grads = Vec::with_capacity(nf);
        for coef in &basis {
            let g: f64 = coef.iter().zip(n.values.iter().zip(&mean)).map(|(a, (v, m))| a * (v - m)).sum();
            let dg: C64 = coef.iter().zip(&n.derivs).map(|(a, d)| d * *a).sum();
            for e in mats {
                let v = &n.h_inv_half * (e * c(g)) * &n.h_half;
                let dv = &n.dh_inv_half * (e * c(g)) * &n.h_half
                    + &n.h_inv_half * (e * dg) * &n.h_half
                    + &n.h_inv_half * (e * c(g)) * &n.dh_half;
                let cov = dv + &n.conn * &v - &v * &n.conn;
                fields.push(v);
                grads.push(cov);
            }
        }
        for a in 0..nf {
            let adj_a = &hinv * grads[a].adjoint() * &n.h;
            for b in a..nf {
                let s = w * n.weight_factor * (&adj_a * &grads[b]).trace().re;
                let m = w * (&fields[a] * &fields[b]).trace().re;
                stiff[(a, b)] += s;
                mass[(a, b)] += m;
                if a != b {
                    stiff[(b, a)] += s;
                    mass[(b, a)] += m;
                }
            }
        }
    }
    // generalized eigenproblem through the mass Cholesky factor
    let chol = mass
        .cholesky()
        .ok_or_else(|| Error::Numeric("trial space is degenerate".into()))?;
    let l_inv = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(nf, nf))
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
    let reduced = &l_inv * stiff * l_inv.transpose();
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let ev = SymmetricEigen::new(reduced).eigenvalues;
    let lam = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(lam > 0.0) {
        return Err(Error::Numeric(format!("non-positive Ritz value {lam}")));
    }
    Ok(lam)
}

#[derive(Clone, Debug)]
pub struct DeltaBoundReport {
    pub delta: f64,
    pub c_delta: f64,
    pub he_defect: f64,
    pub poincare: f64,
    pub bound: f64,
    pub mdon: f64,
    pub pass: bool,
    pub poincare_stable: bool,
}

/// M(h, h0) against −¼·C(δ)⁻¹·C̄(h0)²·C_P(h0). Split bundles of rank ≥ 2
/// are reducible, so they are refused unless `allow_reducible` is set.
pub fn delta_lower_bound_audit(
    h: &SharedMetric,
    h0: &SharedMetric,
    rule: &QuadratureRule,
    allow_reducible: bool,
) -> Result<DeltaBoundReport> {
    if h0.bundle().rank() >= 2 && !allow_reducible {
        return Err(Error::Precondition(format!(
            "{} is reducible; pass the override to audit it anyway",
            h0.bundle()
        )));
    }
    let delta = crate::bundle::delta_boundedness(h.as_ref(), h0.as_ref(), rule)?;
    let cd = c_delta(delta)?;
    let he = he_defect_norm(h0.clone(), rule)?;
    let pc = poincare_constant(h0, rule, 3)?;
    let bound = -0.25 / cd * he * he * pc.constant;
    let kind = match (h.as_fs(), h0.as_fs()) {
        (Some(a), Some(b)) if a.basis() == b.basis() => PathKind::Bergman,
        _ => PathKind::PointwiseExponential,
    };
    let mdon = donaldson(h, h0, &PathSpec { kind, t_order: 16 }, rule)?;
    Ok(DeltaBoundReport {
        delta,
        c_delta: cd,
        he_defect: he,
        poincare: pc.constant,
        bound,
        mdon,
        pass: mdon >= bound - 1e-6,
        poincare_stable: pc.stable,
    })
}

/// h0-selfadjoint part of an endomorphism at a point; used by audits that
/// build trial directions.
pub fn symmetrize(m: &CMat, h: &CMat) -> Result<CMat> {
    selfadjoint_part(m, h)
}

/// e^{c}·Id as a constant field, for scaling paths.
pub fn scalar_velocity(rank: usize, value: f64) -> FieldFn {
    crate::bundle::constant_field(identity(rank) * c(value))
}

/// exp of a hermitian matrix; re-exported for path construction.
pub fn hermitian_exp(m: &CMat) -> CMat {
    herm_exp(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{scalar_field, BundleSpec, ScaledMetric, StandardMetric};
    use crate::linalg::random_hermitian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(d: &[i64]) -> BundleSpec {
        BundleSpec::new(d.to_vec()).unwrap()
    }

    fn random_fs(basis: &SectionBasis, amp: f64, seed: u64) -> SharedMetric {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = PositiveForm::new(herm_exp(&random_hermitian(basis.dim(), amp, &mut rng))).unwrap();
        Arc::new(FsMetric::new(basis.clone(), &g).unwrap())
    }

    #[test]
    fn c_delta_values() {
        assert!((c_delta(1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((c_delta(1.0 - 1e-9).unwrap() - 0.5).abs() < 1e-9);
        let e1 = (-1f64).exp();
        assert!((c_delta(e1).unwrap() - e1).abs() < 1e-14);
        assert!((c_delta((-10f64).exp()).unwrap() - 0.0900004539992976).abs() < 1e-12);
        assert!(c_delta(0.0).is_err() && c_delta(1.5).is_err());
        let mut prev = 0.0;
        for i in 1..=1000 {
            let v = c_delta(i as f64 / 1000.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn functional_vanishes_on_scalings() {
        let rule = QuadratureRule::new(24, 24).unwrap();
        let basis = SectionBasis::new(spec(&[1, 0]), 1).unwrap();
        let h = random_fs(&basis, 0.5, 1);
        let spec_p = PathSpec {
            kind: PathKind::PointwiseExponential,
            t_order: 8,
        };
        assert!(donaldson(&h, &h, &spec_p, &rule).unwrap().abs() < 1e-14);
        for c0 in [-5.0f64, 1.0] {
            let scaled: SharedMetric = Arc::new(ScaledMetric::new(h.clone(), c0.exp()).unwrap());
            let m = donaldson(&scaled, &h, &spec_p, &rule).unwrap();
            assert!(m.abs() < 1e-8, "{m}");
        }
    }

    // Oracle: for h1 = e^{−ψ}h0 on a line bundle the path h0e^{−tψ} has
    // ΛF_t = ΛF_0 + tΔψ with Δ = (1+|z|²)²∂∂̄, so
    // M = −∫ψ(ΛF_0 − d) − ½∫ψΔψ, and the first term vanishes for h0 = FS.
    #[test]
    fn line_bundle_closed_form() {
        let d = 2;
        let rule = QuadratureRule::new(24, 24).unwrap();
        let h0: SharedMetric = Arc::new(StandardMetric::new(spec(&[d])));
        let psi = |ch: Chart, z: C64| {
            let s = z.norm_sqr();
            match ch {
                Chart::Z => 1.0 / (1.0 + s),
                Chart::W => s / (1.0 + s),
            }
        };
        let v = scalar_field(1, move |ch, z| -psi(ch, z));
        let h1: SharedMetric = Arc::new(PointwiseExpMetric::new(h0.clone(), v, 1.0));
        let m = donaldson(
            &h1,
            &h0,
            &PathSpec {
                kind: PathKind::PointwiseExponential,
                t_order: 8,
            },
            &rule,
        )
        .unwrap();
        // ψ = 1/(1+s): ∂∂̄ψ = (s−1)/(1+s)³ in chart Z, so Δψ = (s−1)/(1+s)
        let oracle = -0.5
            * crate::geometry::integrate_real(&rule, |p| {
                let s = p.coord().norm_sqr();
                let (val, lap) = match p.chart() {
                    Chart::Z => (1.0 / (1.0 + s), (s - 1.0) / (1.0 + s)),
                    Chart::W => (s / (1.0 + s), (1.0 - s) / (1.0 + s)),
                };
                val * lap
            })
            .unwrap();
        assert!((oracle - 1.0 / 12.0).abs() < 1e-10);
        assert!((m - oracle).abs() < 1e-7, "{m} vs {oracle}");
    }

    #[test]
    fn bergman_and_pointwise_paths_agree() {
        let rule = QuadratureRule::new(32, 32).unwrap();
        let basis = SectionBasis::new(spec(&[1, -1]), 1).unwrap();
        let h0 = random_fs(&basis, 0.4, 5);
        let h1 = random_fs(&basis, 0.4, 6);
        let b = donaldson(&h1, &h0, &PathSpec::default(), &rule).unwrap();
        let p = donaldson(
            &h1,
            &h0,
            &PathSpec {
                kind: PathKind::PointwiseExponential,
                t_order: 8,
            },
            &rule,
        )
        .unwrap();
        assert!((b - p).abs() < 1e-5 * (1.0 + b.abs()), "{b} vs {p}");
        let back = donaldson(&h0, &h1, &PathSpec::default(), &rule).unwrap();
        assert!((b + back).abs() < 1e-6);
    }

    #[test]
    fn cocycle_on_random_triple() {
        let rule = QuadratureRule::new(24, 24).unwrap();
        let basis = SectionBasis::new(spec(&[0, 0]), 3).unwrap();
        let hs: Vec<SharedMetric> = (0..3).map(|i| random_fs(&basis, 0.5, 20 + i)).collect();
        let d = cocycle_defect(&hs[2], &hs[1], &hs[0], &PathSpec::default(), &rule).unwrap();
        assert!(d < 1e-6, "{d}");
        assert!(cocycle_defect(&hs[1], &hs[1], &hs[0], &PathSpec::default(), &rule).unwrap() < 1e-14);
    }

    #[test]
    fn first_derivative_matches_difference() {
        let rule = QuadratureRule::new(24, 24).unwrap();
        let basis = SectionBasis::new(spec(&[0, 0]), 2).unwrap();
        let h0 = random_fs(&basis, 0.5, 30);
        let h1 = random_fs(&basis, 0.5, 31);
        let path = MetricPath::from_spec(&h0, &h1, &PathSpec::default()).unwrap();
        let t = 0.4;
        let eps = 1e-3;
        let diff = path.integrate_rate(t - eps, t + eps, 8, &rule).unwrap() / (2.0 * eps);
        let exact = first_derivative(&path, t, &rule).unwrap();
        assert!((diff - exact).abs() < 1e-5 * (1.0 + exact.abs()));
        // at an HE metric every direction is critical
        let he: SharedMetric = Arc::new(StandardMetric::new(spec(&[2])));
        let bump = scalar_field(1, |_, z| z.re / (1.0 + z.norm_sqr()));
        let p = MetricPath::Pointwise(PointwisePath::new(he, bump));
        assert!(first_derivative(&p, 0.0, &rule).unwrap().abs() < 1e-6);
    }

    #[test]
    fn geodesic_identities() {
        let basis = SectionBasis::new(spec(&[1, -1]), 1).unwrap();
        let h0 = random_fs(&basis, 0.5, 40);
        let h1 = random_fs(&basis, 0.5, 41);
        let pts: Vec<SpherePoint> = QuadratureRule::new(4, 5).unwrap().nodes().to_vec();
        let g = geodesic(h0.clone(), h1.clone(), 0.3).unwrap();
        assert!(geodesic_residual(&g, &pts).unwrap() < 1e-6);
        for p in &pts {
            let exact = g.velocity(p.chart(), p.coord()).unwrap();
            for s in [0.0, 0.3, 0.9] {
                let fd = fd_velocity(&g, s, p).unwrap();
                assert!(max_abs_diff(&fd, &exact) < 1e-6);
            }
        }
        let scaled: SharedMetric = Arc::new(ScaledMetric::new(h0.clone(), 2f64.exp()).unwrap());
        let trivial = geodesic(h0.clone(), scaled, 0.5).unwrap();
        let p = pts[3];
        let expect = h0.at(&p).unwrap() * c(1f64.exp());
        assert!(max_abs_diff(&trivial.at(&p).unwrap(), &expect) < 1e-10 * expect.norm());
    }

    #[test]
    fn hessian_formula_matches_second_difference() {
        let rule = QuadratureRule::new(24, 24).unwrap();
        let basis = SectionBasis::new(spec(&[1, -1]), 1).unwrap();
        let h0 = random_fs(&basis, 0.4, 50);
        let h1 = random_fs(&basis, 0.4, 51);
        for s in [0.0, 0.5] {
            let d = second_derivative_geodesic(&h0, &h1, s, &rule).unwrap();
            assert!(d.formula >= -1e-8);
            assert!((d.formula - d.fd).abs() < 1e-4 * (1.0 + d.formula.abs()), "{d:?}");
        }
        let scaled: SharedMetric = Arc::new(ScaledMetric::new(h0.clone(), 3.0).unwrap());
        let d = second_derivative_geodesic(&h0, &scaled, 0.5, &rule).unwrap();
        assert!(d.formula.abs() < 1e-8);
    }

    #[test]
    fn curvature_variation_on_paths() {
        let basis = SectionBasis::new(spec(&[1, -1]), 1).unwrap();
        let h0 = random_fs(&basis, 0.5, 60);
        let h1 = random_fs(&basis, 0.5, 61);
        let pts: Vec<SpherePoint> = QuadratureRule::new(4, 4).unwrap().nodes().to_vec();
        let path = MetricPath::from_spec(&h0, &h1, &PathSpec::default()).unwrap();
        assert!(curvature_variation_check(&path, 0.4, &pts).unwrap() < 1e-4);
        let scaling = MetricPath::Pointwise(PointwisePath::new(h0.clone(), scalar_velocity(2, 0.7)));
        assert!(curvature_variation_check(&scaling, 0.2, &pts).unwrap() < 1e-5);
        let same = MetricPath::from_spec(&h0, &h0, &PathSpec::default()).unwrap();
        assert!(curvature_variation_check(&same, 0.5, &pts).unwrap() < 1e-6);
    }

    // Independent oracle: cell-centred finite differences for
    // −((1−x²)f')' + m²f/(1−x²) on (−1, 1).
    fn legendre_fd_eigs(m: usize, n: usize) -> Vec<f64> {
        let h = 2.0 / n as f64;
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let x = -1.0 + (i as f64 + 0.5) * h;
            let left = 1.0 - (x - 0.5 * h).powi(2);
            let right = 1.0 - (x + 0.5 * h).powi(2);
            a[(i, i)] = (left + right) / (h * h) + (m * m) as f64 / (1.0 - x * x);
            if i > 0 {
                a[(i, i - 1)] = -left / (h * h);
            }
            if i + 1 < n {
                a[(i, i + 1)] = -right / (h * h);
            }
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    #[test]
    fn poincare_on_trivial_bundles() {
        // Richardson over three grids with the observed order
        let first = |n: usize| legendre_fd_eigs(0, n)[1].min(legendre_fd_eigs(1, n)[0]);
        let (a, b, e) = (first(300), first(600), first(1200));
        let ratio = (a - b) / (b - e);
        let oracle = e + (e - b) / (ratio - 1.0);
        assert!((oracle - 2.0).abs() < 1e-3, "{a} {b} {e} -> {oracle}");
        let rule = QuadratureRule::new(16, 16).unwrap();
        let line: SharedMetric = Arc::new(StandardMetric::new(spec(&[0])));
        let rep = poincare_constant(&line, &rule, 3).unwrap();
        assert!((rep.lambda1 - oracle).abs() < 1e-2);
        assert!(rep.stable);
        for w in rep.history.windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-12);
        }
        let twin: SharedMetric = Arc::new(StandardMetric::new(spec(&[0, 0])));
        let rep2 = poincare_constant(&twin, &rule, 3).unwrap();
        assert!((rep2.lambda1 - rep.lambda1).abs() < 1e-8);
    }

    #[test]
    fn delta_audit_examples() {
        let rule = QuadratureRule::new(20, 20).unwrap();
        let basis = SectionBasis::new(spec(&[3]), 1).unwrap();
        let h0: SharedMetric = Arc::new(FsMetric::new(basis.clone(), &PositiveForm::identity(basis.dim())).unwrap());
        let same = delta_lower_bound_audit(&h0, &h0, &rule, false).unwrap();
        assert!(same.pass && same.mdon == 0.0 && same.delta == 1.0);
        assert!(same.he_defect > 0.0 && same.bound < 0.0);
        let h = random_fs(&basis, 0.8, 70);
        let rep = delta_lower_bound_audit(&h, &h0, &rule, false).unwrap();
        assert!(rep.pass, "{rep:?}");
        let twin: SharedMetric = Arc::new(StandardMetric::new(spec(&[1, 1])));
        assert!(matches!(
            delta_lower_bound_audit(&twin, &twin, &rule, false),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn he_defect_examples() {
        let rule = QuadratureRule::new(16, 16).unwrap();
        let split: SharedMetric = Arc::new(StandardMetric::new(spec(&[1, -1])));
        assert!((he_defect_norm(split.clone(), &rule).unwrap() - 2f64.sqrt()).abs() < 1e-10);
        let scaled: SharedMetric = Arc::new(ScaledMetric::new(split, 5.0).unwrap());
        assert!((he_defect_norm(scaled, &rule).unwrap() - 2f64.sqrt()).abs() < 1e-10);
    }
}
