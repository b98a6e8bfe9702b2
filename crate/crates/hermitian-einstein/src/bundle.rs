//! Split bundles ⊕O(aᵢ), hermitian metric fields and their curvature.
//!
//! A metric is a matrix H in the monomial frame of the chart that owns the
//! point, with ⟨s, t⟩ = t†Hs. Endomorphisms act on coefficient columns, the
//! Chern connection is A = H⁻¹∂H and Λ_ωF = −(1+|c|²)² ∂_c̄(H⁻¹∂_c H). On the
//! overlap the W-frame components are D̄·H_Z·D with D = diag(z^{aᵢ}).

use std::sync::Arc;

use num_rational::Rational64;

use crate::geometry::{contraction_factor, Chart, QuadratureRule, SpherePoint, VOLUME};
use crate::linalg::{
    c, cholesky, herm_eigen, herm_exp, herm_inv_sqrt, herm_log, herm_pow,
    herm_sqrt, identity, inverse, pencil_eigenvalues, real_diag, CMat, C64,
};
use crate::sections::FsMetric;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BundleSpec {
    degrees: Vec<i64>,
}

impl BundleSpec {
    pub fn new(degrees: Vec<i64>) -> Result<Self> {
        if degrees.is_empty() {
            return Err(Error::Argument("a bundle needs at least one summand".into()));
        }
        Ok(BundleSpec { degrees })
    }

    pub fn degrees(&self) -> &[i64] {
        &self.degrees
    }

    pub fn rank(&self) -> usize {
        self.degrees.len()
    }

    pub fn degree(&self) -> i64 {
        self.degrees.iter().sum()
    }

    pub fn slope(&self) -> Rational64 {
        Rational64::new(self.degree(), self.rank() as i64)
    }

    pub fn slope_f64(&self) -> f64 {
        self.degree() as f64 / self.rank() as f64
    }

    /// Least k with H¹(E(k−1)) = 0, i.e. max(−aᵢ).
    pub fn regularity(&self) -> i64 {
        self.degrees.iter().map(|a| -a).max().unwrap_or(0)
    }
}

impl std::fmt::Display for BundleSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.degrees.iter().map(|a| format!("O({a})")).collect();
        write!(f, "{}", parts.join("⊕"))
    }
}

/// D(z) with e_W = z^{a}·e_Z on each summand.
pub fn frame_transition(degrees: &[i64], z: C64) -> CMat {
    let mut d = CMat::zeros(degrees.len(), degrees.len());
    for (i, a) in degrees.iter().enumerate() {
        d[(i, i)] = z.powi(*a as i32);
    }
    d
}

/// Metric components in the other chart's frame at the same point. The
/// transition has the same form in both directions, D evaluated at the
/// current coordinate.
pub fn to_other_chart(h: &CMat, degrees: &[i64], coord: C64) -> CMat {
    let d = frame_transition(degrees, coord);
    d.adjoint() * h * d
}

pub(crate) fn location(chart: Chart, coord: C64) -> String {
    format!("{chart:?}-chart point {coord}")
}

/// A hermitian metric on a split bundle, evaluated pointwise.
pub trait MetricField: Send + Sync {
    fn bundle(&self) -> &BundleSpec;

    /// Components in the monomial frame of `chart` at local coordinate
    /// `coord`. The coordinate need not be canonical.
    fn eval(&self, chart: Chart, coord: C64) -> Result<CMat>;

    /// Λ_ωF as an endomorphism in the same frame.
    fn lambda_curvature(&self, chart: Chart, coord: C64) -> Result<CMat> {
        fd_lambda_curvature(self, chart, coord)
    }

    /// Chern connection coefficient H⁻¹∂_c H.
    fn connection(&self, chart: Chart, coord: C64) -> Result<CMat> {
        fd_connection(self, chart, coord)
    }

    fn as_fs(&self) -> Option<&FsMetric> {
        None
    }

    fn at(&self, p: &SpherePoint) -> Result<CMat> {
        self.eval(p.chart(), p.coord())
    }
}

pub type SharedMetric = Arc<dyn MetricField>;

pub(crate) fn require_positive(h: &CMat, chart: Chart, coord: C64) -> Result<()> {
    if h.iter().any(|x| !(x.re.is_finite() && x.im.is_finite())) {
        return Err(Error::eval(location(chart, coord), "metric is not finite"));
    }
    cholesky(h)
        .map(|_| ())
        .map_err(|e| Error::eval(location(chart, coord), format!("metric not positive definite: {e}")))
}

/// Values and first/mixed derivatives of a matrix field in one chart.
pub struct Stencil {
    pub value: CMat,
    pub dz: CMat,
    pub dzbar: CMat,
    pub dz_dzbar: CMat,
}

/// Fourth-order centred differences in (Re c, Im c) with step 10⁻³(1+|c|).
pub fn stencil<F>(f: F, chart: Chart, coord: C64, with_second: bool) -> Result<Stencil>
where
    F: Fn(Chart, C64) -> Result<CMat>,
{
    let h = 1e-3 * (1.0 + coord.norm());
    let ex = C64::new(h, 0.0);
    let ey = C64::new(0.0, h);
    let f0 = f(chart, coord)?;
    let fx1 = f(chart, coord + ex)?;
    let fx_1 = f(chart, coord - ex)?;
    let fx2 = f(chart, coord + ex * 2.0)?;
    let fx_2 = f(chart, coord - ex * 2.0)?;
    let fy1 = f(chart, coord + ey)?;
    let fy_1 = f(chart, coord - ey)?;
    let fy2 = f(chart, coord + ey * 2.0)?;
    let fy_2 = f(chart, coord - ey * 2.0)?;
    let d1 = |p2: &CMat, p1: &CMat, m1: &CMat, m2: &CMat| {
        (-p2 + p1 * c(8.0) - m1 * c(8.0) + m2) * c(1.0 / (12.0 * h))
    };
    let fx = d1(&fx2, &fx1, &fx_1, &fx_2);
    let fy = d1(&fy2, &fy1, &fy_1, &fy_2);
    let i = C64::new(0.0, 1.0);
    let dz = (&fx - &fy * i) * c(0.5);
    let dzbar = (&fx + &fy * i) * c(0.5);
    let dz_dzbar = if with_second {
        let d2 = |p2: &CMat, p1: &CMat, m1: &CMat, m2: &CMat| {
            (-p2 + p1 * c(16.0) - &f0 * c(30.0) + m1 * c(16.0) - m2) * c(1.0 / (12.0 * h * h))
        };
        (d2(&fx2, &fx1, &fx_1, &fx_2) + d2(&fy2, &fy1, &fy_1, &fy_2)) * c(0.25)
    } else {
        CMat::zeros(f0.nrows(), f0.ncols())
    };
    Ok(Stencil {
        value: f0,
        dz,
        dzbar,
        dz_dzbar,
    })
}

pub fn fd_lambda_curvature<M: MetricField + ?Sized>(h: &M, chart: Chart, coord: C64) -> Result<CMat> {
    let st = stencil(|ch, z| h.eval(ch, z), chart, coord, true)?;
    require_positive(&st.value, chart, coord)?;
    let hinv = inverse(&st.value)?;
    let inner = &hinv * (&st.dz_dzbar - &st.dzbar * &hinv * &st.dz);
    Ok(inner * c(-contraction_factor(coord)))
}

pub fn fd_connection<M: MetricField + ?Sized>(h: &M, chart: Chart, coord: C64) -> Result<CMat> {
    let st = stencil(|ch, z| h.eval(ch, z), chart, coord, false)?;
    require_positive(&st.value, chart, coord)?;
    Ok(inverse(&st.value)? * st.dz)
}

/// ⊕(1+|c|²)^{−aᵢ}: the Hermitian–Einstein metric of each summand.
#[derive(Clone, Debug)]
pub struct StandardMetric {
    bundle: BundleSpec,
}

impl StandardMetric {
    pub fn new(bundle: BundleSpec) -> Self {
        StandardMetric { bundle }
    }
}

impl MetricField for StandardMetric {
    fn bundle(&self) -> &BundleSpec {
        &self.bundle
    }

    fn eval(&self, _chart: Chart, coord: C64) -> Result<CMat> {
        let t = 1.0 + coord.norm_sqr();
        let d: Vec<f64> = self.bundle.degrees().iter().map(|a| t.powi(-*a as i32)).collect();
        Ok(real_diag(&d))
    }

    fn lambda_curvature(&self, _chart: Chart, _coord: C64) -> Result<CMat> {
        let d: Vec<f64> = self.bundle.degrees().iter().map(|a| *a as f64).collect();
        Ok(real_diag(&d))
    }

    fn connection(&self, _chart: Chart, coord: C64) -> Result<CMat> {
        let t = 1.0 + coord.norm_sqr();
        let mut m = CMat::zeros(self.bundle.rank(), self.bundle.rank());
        for (i, a) in self.bundle.degrees().iter().enumerate() {
            m[(i, i)] = coord.conj() * (-(*a as f64) / t);
        }
        Ok(m)
    }
}

/// c·h for a positive constant c.
#[derive(Clone)]
pub struct ScaledMetric {
    inner: SharedMetric,
    factor: f64,
}

impl ScaledMetric {
    pub fn new(inner: SharedMetric, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Argument(format!("scale factor must be positive, got {factor}")));
        }
        Ok(ScaledMetric { inner, factor })
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }

    pub fn inner(&self) -> &SharedMetric {
        &self.inner
    }
}

impl MetricField for ScaledMetric {
    fn bundle(&self) -> &BundleSpec {
        self.inner.bundle()
    }

    fn eval(&self, chart: Chart, coord: C64) -> Result<CMat> {
        Ok(self.inner.eval(chart, coord)? * c(self.factor))
    }

    fn lambda_curvature(&self, chart: Chart, coord: C64) -> Result<CMat> {
        self.inner.lambda_curvature(chart, coord)
    }

    fn connection(&self, chart: Chart, coord: C64) -> Result<CMat> {
        self.inner.connection(chart, coord)
    }
}

/// Pieces of the pointwise geodesic through h0 and h1: H0^{±1/2} and
/// X = H0^{−1/2} H1 H0^{−1/2}.
struct GeodesicFrame {
    h0_half: CMat,
    h0_inv_half: CMat,
    x: CMat,
}

fn geodesic_frame(h0: &dyn MetricField, h1: &dyn MetricField, chart: Chart, coord: C64) -> Result<GeodesicFrame> {
    let a = h0.eval(chart, coord)?;
    let b = h1.eval(chart, coord)?;
    require_positive(&a, chart, coord)?;
    require_positive(&b, chart, coord)?;
    let h0_half = herm_sqrt(&a)?;
    let h0_inv_half = herm_inv_sqrt(&a)?;
    let x = &h0_inv_half * b * &h0_inv_half;
    Ok(GeodesicFrame {
        h0_half,
        h0_inv_half,
        x,
    })
}

/// h_s = H0^{1/2} X^s H0^{1/2}, i.e. H0·exp(s·log(H0⁻¹H1)).
#[derive(Clone)]
pub struct GeodesicMetric {
    h0: SharedMetric,
    h1: SharedMetric,
    s: f64,
}

impl GeodesicMetric {
    pub fn new(h0: SharedMetric, h1: SharedMetric, s: f64) -> Result<Self> {
        if h0.bundle() != h1.bundle() {
            return Err(Error::Argument("geodesic endpoints live on different bundles".into()));
        }
        Ok(GeodesicMetric { h0, h1, s })
    }

    pub fn endpoints(&self) -> (&SharedMetric, &SharedMetric) {
        (&self.h0, &self.h1)
    }

    pub fn parameter(&self) -> f64 {
        self.s
    }

    pub fn at_parameter(&self, s: f64) -> GeodesicMetric {
        GeodesicMetric {
            h0: self.h0.clone(),
            h1: self.h1.clone(),
            s,
        }
    }

    /// v = log(H0⁻¹H1) = H0^{−1/2} log(X) H0^{1/2}; constant along the curve.
    pub fn velocity(&self, chart: Chart, coord: C64) -> Result<CMat> {
        let g = geodesic_frame(self.h0.as_ref(), self.h1.as_ref(), chart, coord)?;
        Ok(&g.h0_inv_half * herm_log(&g.x)? * &g.h0_half)
    }

    /// e^{s v} = H0⁻¹ h_s.
    pub fn exp_velocity(&self, s: f64, chart: Chart, coord: C64) -> Result<CMat> {
        let g = geodesic_frame(self.h0.as_ref(), self.h1.as_ref(), chart, coord)?;
        Ok(&g.h0_inv_half * herm_pow(&g.x, s)? * &g.h0_half)
    }
}

impl MetricField for GeodesicMetric {
    fn bundle(&self) -> &BundleSpec {
        self.h0.bundle()
    }

    fn eval(&self, chart: Chart, coord: C64) -> Result<CMat> {
        let g = geodesic_frame(self.h0.as_ref(), self.h1.as_ref(), chart, coord)?;
        Ok(&g.h0_half * herm_pow(&g.x, self.s)? * &g.h0_half)
    }
}

pub type FieldFn = Arc<dyn Fn(Chart, C64) -> Result<CMat> + Send + Sync>;

/// H0·exp(s·v) for an H0-selfadjoint endomorphism field v.
#[derive(Clone)]
pub struct PointwiseExpMetric {
    h0: SharedMetric,
    v: FieldFn,
    s: f64,
}

impl PointwiseExpMetric {
    pub fn new(h0: SharedMetric, v: FieldFn, s: f64) -> Self {
        PointwiseExpMetric { h0, v, s }
    }

    pub fn base(&self) -> &SharedMetric {
        &self.h0
    }

    pub fn field(&self) -> &FieldFn {
        &self.v
    }

    pub fn at_parameter(&self, s: f64) -> PointwiseExpMetric {
        PointwiseExpMetric {
            h0: self.h0.clone(),
            v: self.v.clone(),
            s,
        }
    }
}

impl MetricField for PointwiseExpMetric {
    fn bundle(&self) -> &BundleSpec {
        self.h0.bundle()
    }

    fn eval(&self, chart: Chart, coord: C64) -> Result<CMat> {
        let a = self.h0.eval(chart, coord)?;
        require_positive(&a, chart, coord)?;
        let half = herm_sqrt(&a)?;
        let inv_half = herm_inv_sqrt(&a)?;
        let v = (self.v)(chart, coord)?;
        let sym = &half * v * &inv_half * c(self.s);
        Ok(&half * herm_exp(&sym) * &half)
    }
}

/// A field of endomorphisms in chart frames, optionally tied to the metric
/// it is selfadjoint for.
#[derive(Clone)]
pub struct EndomorphismField {
    eval: FieldFn,
    metric: Option<SharedMetric>,
}

impl EndomorphismField {
    pub fn new(eval: FieldFn, metric: Option<SharedMetric>) -> Self {
        EndomorphismField { eval, metric }
    }

    pub fn eval(&self, chart: Chart, coord: C64) -> Result<CMat> {
        (self.eval)(chart, coord)
    }

    pub fn at(&self, p: &SpherePoint) -> Result<CMat> {
        self.eval(p.chart(), p.coord())
    }

    pub fn metric(&self) -> Option<&SharedMetric> {
        self.metric.as_ref()
    }

    /// Frobenius norm of the anti-hermitian part of H·M.
    pub fn selfadjoint_defect(&self, p: &SpherePoint) -> Result<f64> {
        let m = self.at(p)?;
        match &self.metric {
            Some(h) => {
                let hm = h.at(p)? * m;
                Ok(crate::linalg::hermitian_defect(&hm))
            }
            None => Ok(crate::linalg::hermitian_defect(&m)),
        }
    }
}

/// ½(M + H⁻¹M†H): the H-selfadjoint part.
pub fn selfadjoint_part(m: &CMat, h: &CMat) -> Result<CMat> {
    let hinv = inverse(h)?;
    Ok((m + &hinv * m.adjoint() * h) * c(0.5))
}

/// Real eigenvalues of an H-selfadjoint endomorphism, ascending.
pub fn selfadjoint_eigenvalues(m: &CMat, h: &CMat) -> Result<Vec<f64>> {
    let half = herm_sqrt(h)?;
    let inv_half = herm_inv_sqrt(h)?;
    Ok(herm_eigen(&(&half * m * inv_half)).0)
}

pub struct HeResidual {
    pub sup: f64,
    pub l2: f64,
    pub field: EndomorphismField,
}

/// Λ_ωF_h − (μ/Vol)·Id at the rule's nodes.
pub fn he_residual(h: SharedMetric, rule: &QuadratureRule) -> Result<HeResidual> {
    let r = h.bundle().rank();
    let mu = h.bundle().slope_f64() / VOLUME;
    let hh = h.clone();
    let field: FieldFn = Arc::new(move |chart, coord| {
        let lf = hh.lambda_curvature(chart, coord)?;
        Ok(lf - identity(r) * c(mu))
    });
    let per_node = rule.map(|p| {
        let hm = h.at(p)?;
        let res = selfadjoint_part(&field(p.chart(), p.coord())?, &hm)?;
        let ev = selfadjoint_eigenvalues(&res, &hm)?;
        let sup = ev.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let sq: f64 = ev.iter().map(|v| v * v).sum();
        Ok((sup, sq))
    })?;
    let sup = per_node.iter().fold(0.0_f64, |a, (s, _)| a.max(*s));
    let sq: Vec<f64> = per_node
        .iter()
        .zip(rule.weights())
        .map(|((_, q), w)| q * w)
        .collect();
    let l2 = crate::geometry::pairwise_sum(&sq).unwrap_or(0.0).max(0.0).sqrt();
    Ok(HeResidual {
        sup,
        l2,
        field: EndomorphismField::new(field, Some(h)),
    })
}

/// h/c with c = min over nodes of λ_min(h·h_ref⁻¹); returns the rescaled
/// metric and c.
pub fn scale_normalize(h: SharedMetric, h_ref: &dyn MetricField, rule: &QuadratureRule) -> Result<(ScaledMetric, f64)> {
    let mins = rule.map(|p| {
        let ev = pencil_eigenvalues(&h.at(p)?, &h_ref.at(p)?)?;
        Ok(ev[0])
    })?;
    let factor = mins.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::Numeric(format!("degenerate scale factor {factor}")));
    }
    Ok((ScaledMetric::new(h, 1.0 / factor)?, factor))
}

/// min over nodes of λ_min/λ_max of h·h0⁻¹.
pub fn delta_boundedness(h: &dyn MetricField, h0: &dyn MetricField, rule: &QuadratureRule) -> Result<f64> {
    let ratios = rule.map(|p| {
        let ev = pencil_eigenvalues(&h.at(p)?, &h0.at(p)?)?;
        Ok(ev[0] / ev[ev.len() - 1])
    })?;
    Ok(ratios.iter().cloned().fold(1.0_f64, f64::min))
}

/// Constant endomorphism field `m` viewed as acting in every chart frame.
pub fn constant_field(m: CMat) -> FieldFn {
    Arc::new(move |_, _| Ok(m.clone()))
}

/// Scalar function times Id.
pub fn scalar_field<F>(rank: usize, f: F) -> FieldFn
where
    F: Fn(Chart, C64) -> f64 + Send + Sync + 'static,
{
    Arc::new(move |chart, coord| Ok(identity(rank) * c(f(chart, coord))))
}

/// H0⁻¹H as an endomorphism.
pub fn relative_endomorphism(h: &CMat, h0: &CMat) -> Result<CMat> {
    Ok(inverse(h0)? * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use proptest::prelude::*;

    fn spec(d: &[i64]) -> BundleSpec {
        BundleSpec::new(d.to_vec()).unwrap()
    }

    #[test]
    fn slopes_and_regularity() {
        assert_eq!(spec(&[1, -1]).slope(), Rational64::new(0, 1));
        assert_eq!(spec(&[2, 2]).slope(), Rational64::new(2, 1));
        assert_eq!(spec(&[3, 0, 0]).slope(), Rational64::new(1, 1));
        assert_eq!(spec(&[0, 0]).regularity(), 0);
        assert_eq!(spec(&[1, -1]).regularity(), 1);
        assert_eq!(spec(&[-3]).regularity(), 3);
        assert!(BundleSpec::new(vec![]).is_err());
    }

    // Oracle: for h = (1+|z|²)^{−d}, −∂∂̄ log h = d/(1+|z|²)², so Λ_ωF = d.
    #[test]
    fn fd_curvature_of_standard_line_metric() {
        for d in [-2i64, 0, 1, 3] {
            let h = StandardMetric::new(spec(&[d]));
            for z in [C64::new(0.3, -0.2), C64::new(0.9, 0.4), C64::new(-0.1, 0.0)] {
                let fd = fd_lambda_curvature(&h, Chart::Z, z).unwrap();
                assert!((fd[(0, 0)] - c(d as f64)).norm() < 1e-7, "d={d}: {}", fd[(0, 0)]);
                let conn = fd_connection(&h, Chart::Z, z).unwrap();
                let exact = h.connection(Chart::Z, z).unwrap();
                assert!(max_abs_diff(&conn, &exact) < 1e-9);
            }
        }
    }

    #[test]
    fn standard_metric_chart_transition() {
        let b = spec(&[2, -1, 0]);
        let h = StandardMetric::new(b.clone());
        let z = C64::new(1.3, 0.7);
        let hz = h.eval(Chart::Z, z).unwrap();
        let hw = h.eval(Chart::W, z.inv()).unwrap();
        assert!(max_abs_diff(&to_other_chart(&hz, b.degrees(), z), &hw) < 1e-12);
    }

    #[test]
    fn he_residual_examples() {
        let rule = QuadratureRule::new(16, 16).unwrap();
        let line: SharedMetric = Arc::new(StandardMetric::new(spec(&[4])));
        assert!(he_residual(line, &rule).unwrap().sup < 1e-8);
        let twin: SharedMetric = Arc::new(StandardMetric::new(spec(&[2, 2])));
        assert!(he_residual(twin, &rule).unwrap().sup < 1e-8);
        let split: SharedMetric = Arc::new(StandardMetric::new(spec(&[1, -1])));
        let res = he_residual(split, &rule).unwrap();
        assert!((res.sup - 1.0).abs() < 1e-12);
        assert!((res.l2 - 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn flat_metric_has_no_curvature() {
        let h: SharedMetric = Arc::new(StandardMetric::new(spec(&[0, 0])));
        let fd = fd_lambda_curvature(h.as_ref(), Chart::Z, C64::new(0.2, 0.5)).unwrap();
        assert!(fd.norm() < 1e-8);
        let scaled = ScaledMetric::new(h.clone(), 7.0).unwrap();
        let fd2 = fd_lambda_curvature(&scaled, Chart::Z, C64::new(0.2, 0.5)).unwrap();
        assert!(fd2.norm() < 1e-8);
    }

    #[test]
    fn scale_normalize_examples() {
        let rule = QuadratureRule::new(8, 8).unwrap();
        let base: SharedMetric = Arc::new(StandardMetric::new(spec(&[1, 0])));
        let tripled: SharedMetric = Arc::new(ScaledMetric::new(base.clone(), 3.0).unwrap());
        let (n, f) = scale_normalize(tripled, base.as_ref(), &rule).unwrap();
        assert!((f - 3.0).abs() < 1e-12);
        let (n2, f2) = scale_normalize(Arc::new(n), base.as_ref(), &rule).unwrap();
        assert!((f2 - 1.0).abs() < 1e-12);
        let _ = n2;
        let (_, f1) = scale_normalize(base.clone(), base.as_ref(), &rule).unwrap();
        assert!((f1 - 1.0).abs() < 1e-12);
        let diag: FieldFn = constant_field(real_diag(&[2f64.ln(), 8f64.ln()]));
        let stretched: SharedMetric = Arc::new(PointwiseExpMetric::new(base.clone(), diag, 1.0));
        let (_, f3) = scale_normalize(stretched.clone(), base.as_ref(), &rule).unwrap();
        assert!((f3 - 2.0).abs() < 1e-12);
        let delta = delta_boundedness(stretched.as_ref(), base.as_ref(), &rule).unwrap();
        assert!((delta - 0.25).abs() < 1e-12);
    }

    #[test]
    fn geodesic_endpoints_and_velocity() {
        let base: SharedMetric = Arc::new(StandardMetric::new(spec(&[1, 0])));
        let m = CMat::from_row_slice(2, 2, &[c(0.4), C64::new(0.1, 0.2), C64::new(0.1, -0.2), c(-0.3)]);
        let other: SharedMetric = Arc::new(PointwiseExpMetric::new(base.clone(), constant_field(m), 1.0));
        let z = C64::new(0.4, -0.3);
        let g0 = GeodesicMetric::new(base.clone(), other.clone(), 0.0).unwrap();
        let g1 = g0.at_parameter(1.0);
        assert!(max_abs_diff(&g0.eval(Chart::Z, z).unwrap(), &base.eval(Chart::Z, z).unwrap()) < 1e-12);
        assert!(max_abs_diff(&g1.eval(Chart::Z, z).unwrap(), &other.eval(Chart::Z, z).unwrap()) < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn geodesic_chart_transition(re in 0.6f64..1.6, im in -0.8f64..0.8) {
            let b = spec(&[1, -1]);
            let base: SharedMetric = Arc::new(StandardMetric::new(b.clone()));
            let tilt = CMat::from_row_slice(2, 2, &[c(0.3), c(0.0), c(0.0), c(-0.5)]);
            let other: SharedMetric = Arc::new(PointwiseExpMetric::new(base.clone(), constant_field(tilt), 1.0));
            let g = GeodesicMetric::new(base, other, 0.37).unwrap();
            let z = C64::new(re, im);
            let hz = g.eval(Chart::Z, z).unwrap();
            let hw = g.eval(Chart::W, z.inv()).unwrap();
            prop_assert!(max_abs_diff(&to_other_chart(&hz, b.degrees(), z), &hw) < 1e-10);
        }
    }
}
