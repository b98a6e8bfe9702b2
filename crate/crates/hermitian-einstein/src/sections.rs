//! Global sections of E(k), Gram forms and Fubini–Study metrics.
//!
//! The basis of H⁰(E(k)) is the monomials z^j·e_i with 0 ≤ j ≤ aᵢ+k. In
//! chart W the same section reads w^{aᵢ+k−j} in the W frame of E(k).
//!
//! FS(G) is evaluated without forming G⁻¹. With G⁻¹ = UU† and A = S·U, take
//! the thin QR factorization A† = QR. Then S G⁻¹ S† = R†R, so the metric is
//! e^{kφ}R⁻¹R^{−†}, and curvature and path derivatives are expressed through
//! Q and R. This stays well conditioned when G has a spread of e^{±hundreds}.

use std::sync::Arc;

use crate::bundle::{location, BundleSpec, MetricField};
use crate::geometry::{contraction_factor, potential, Chart, QuadratureRule, SpherePoint, VOLUME};
use crate::linalg::{
    c, cholesky, herm_eigen, herm_exp, identity, inverse, op_norm, pencil_eigenvalues, CMat, C64,
};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SectionBasis {
    bundle: BundleSpec,
    level: i64,
    entries: Vec<(usize, usize)>,
}

impl SectionBasis {
    pub fn new(bundle: BundleSpec, level: i64) -> Result<Self> {
        let reg = bundle.regularity();
        if level < reg {
            return Err(Error::Argument(format!(
                "level {level} is below the regularity of {bundle}; need k ≥ {reg}"
            )));
        }
        let mut entries = Vec::new();
        for (i, a) in bundle.degrees().iter().enumerate() {
            for j in 0..=(a + level) as usize {
                entries.push((i, j));
            }
        }
        Ok(SectionBasis {
            bundle,
            level,
            entries,
        })
    }

    pub fn bundle(&self) -> &BundleSpec {
        &self.bundle
    }

    pub fn level(&self) -> i64 {
        self.level
    }

    /// (summand, exponent of z) for each basis section.
    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// Index range of the sections of summand `i`.
    pub fn summand_range(&self, i: usize) -> std::ops::Range<usize> {
        let start = self.entries.iter().position(|e| e.0 == i).unwrap_or(0);
        let len = self.entries.iter().filter(|e| e.0 == i).count();
        start..start + len
    }

    fn exponent(&self, chart: Chart, idx: usize) -> i64 {
        let (i, j) = self.entries[idx];
        match chart {
            Chart::Z => j as i64,
            Chart::W => self.bundle.degrees()[i] + self.level - j as i64,
        }
    }

    /// r×N matrix of section values in the frame of `chart`.
    pub fn eval_matrix(&self, chart: Chart, coord: C64) -> CMat {
        let mut s = CMat::zeros(self.bundle.rank(), self.dim());
        for (col, (row, _)) in self.entries.iter().enumerate() {
            s[(*row, col)] = coord.powi(self.exponent(chart, col) as i32);
        }
        s
    }

    /// ∂/∂c of `eval_matrix`.
    pub fn derivative_matrix(&self, chart: Chart, coord: C64) -> CMat {
        let mut s = CMat::zeros(self.bundle.rank(), self.dim());
        for (col, (row, _)) in self.entries.iter().enumerate() {
            let e = self.exponent(chart, col);
            if e > 0 {
                s[(*row, col)] = coord.powi(e as i32 - 1) * e as f64;
            }
        }
        s
    }
}

/// An N×N hermitian positive definite form.
#[derive(Clone, Debug, PartialEq)]
pub struct PositiveForm(CMat);

impl PositiveForm {
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Argument("Gram form must be square".into()));
        }
        let scale = m.norm().max(1.0);
        if crate::linalg::hermitian_defect(&m) > 1e-12 * scale {
            return Err(Error::Argument("Gram form is not hermitian".into()));
        }
        cholesky(&m)?;
        Ok(PositiveForm(crate::linalg::hermitian_part(&m)))
    }

    pub fn identity(n: usize) -> Self {
        PositiveForm(identity(n))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }
}

/// G_{ij} = ∫ e^{−kφ} sᵢ† h sⱼ ω.
pub fn l2_gram(basis: &SectionBasis, h: &dyn MetricField, rule: &QuadratureRule) -> Result<PositiveForm> {
    if basis.bundle() != h.bundle() {
        return Err(Error::Argument("metric and basis live on different bundles".into()));
    }
    let k = basis.level() as f64;
    let g = rule.reduce(|p, w| {
        let s = basis.eval_matrix(p.chart(), p.coord());
        let hm = h.at(p)?;
        let weight = w * (-k * potential(p.coord())).exp();
        Ok(s.adjoint() * hm * s * c(weight))
    })?;
    PositiveForm::new(crate::linalg::hermitian_part(&g)).map_err(|e| {
        Error::Numeric(format!("L² Gram form is degenerate ({e}); try a finer quadrature rule"))
    })
}

/// Pointwise data of the stable FS kernel.
pub struct FsKernel {
    /// N×r with orthonormal columns.
    pub q: CMat,
    /// r×r upper triangular, S G⁻¹ S† = R†R.
    pub r: CMat,
    pub r_inv_adj: CMat,
    /// R^{−†}·S'·U.
    pub a_prime_hat: CMat,
    /// Λ_ωF in the orthonormalized frame, hermitian.
    pub lambda_hat: CMat,
    pub chart: Chart,
    pub coord: C64,
}

impl FsKernel {
    pub fn metric(&self, level: i64) -> CMat {
        let r_inv = self.r_inv_adj.adjoint();
        &r_inv * &self.r_inv_adj * c((level as f64 * potential(self.coord)).exp())
    }

    /// Λ_ωF in the chart frame.
    pub fn lambda_curvature(&self) -> CMat {
        self.r.adjoint() * &self.lambda_hat * &self.r_inv_adj
    }
}

#[derive(Clone, Debug)]
pub struct FsMetric {
    basis: SectionBasis,
    factor: CMat,
}

impl FsMetric {
    pub fn new(basis: SectionBasis, gram: &PositiveForm) -> Result<Self> {
        if gram.matrix().nrows() != basis.dim() {
            return Err(Error::Argument(format!(
                "Gram form has size {} but H⁰ has dimension {}",
                gram.matrix().nrows(),
                basis.dim()
            )));
        }
        let l = cholesky(gram.matrix())?;
        let l_inv = l
            .solve_lower_triangular(&identity(basis.dim()))
            .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
        Ok(FsMetric {
            basis,
            factor: l_inv.adjoint(),
        })
    }

    /// FS metric of the form G with G⁻¹ = U·U†.
    pub fn from_factor(basis: SectionBasis, factor: CMat) -> Result<Self> {
        if factor.nrows() != basis.dim() || factor.ncols() != basis.dim() {
            return Err(Error::Argument("factor has the wrong size".into()));
        }
        Ok(FsMetric { basis, factor })
    }

    pub fn basis(&self) -> &SectionBasis {
        &self.basis
    }

    pub fn factor(&self) -> &CMat {
        &self.factor
    }

    /// G = (U U†)⁻¹; only sensible when G is well conditioned.
    pub fn gram(&self) -> Result<CMat> {
        inverse(&(&self.factor * self.factor.adjoint()))
    }

    pub fn kernel(&self, chart: Chart, coord: C64) -> Result<FsKernel> {
        let s = self.basis.eval_matrix(chart, coord);
        let a = &s * &self.factor;
        let qr = a.adjoint().qr();
        let q = qr.q();
        let r = qr.r();
        let rank = self.basis.bundle().rank();
        for i in 0..rank {
            // compare against the column so that frame rescalings are harmless
            let scale = r.column(i).norm().max(f64::MIN_POSITIVE);
            if !(r[(i, i)].norm() > 1e-15 * scale) {
                return Err(Error::eval(
                    location(chart, coord),
                    "section evaluation has rank below r",
                ));
            }
        }
        let r_adj = r.adjoint();
        let r_inv_adj = r_adj
            .solve_lower_triangular(&identity(rank))
            .ok_or_else(|| Error::eval(location(chart, coord), "triangular solve failed"))?;
        let a_prime = self.basis.derivative_matrix(chart, coord) * &self.factor;
        let a_prime_hat = r_adj
            .solve_lower_triangular(&a_prime)
            .ok_or_else(|| Error::eval(location(chart, coord), "triangular solve failed"))?;
        let proj = &a_prime_hat - (&a_prime_hat * &q) * q.adjoint();
        let t_hat = &proj * proj.adjoint();
        let k = self.basis.level() as f64;
        let lambda_hat =
            crate::linalg::hermitian_part(&(t_hat * c(contraction_factor(coord)))) - identity(rank) * c(k);
        Ok(FsKernel {
            q,
            r,
            r_inv_adj,
            a_prime_hat,
            lambda_hat,
            chart,
            coord,
        })
    }

    /// −tr(Q†ΞQ·(Λ̂ − μ)) for d/dt(G⁻¹) = U Ξ U†: the integrand
    /// tr(h⁻¹ḣ(Λ_ωF − μ)) of the Donaldson functional along the path.
    pub fn rate_density(&self, xi: &CMat, p: &SpherePoint) -> Result<f64> {
        let ker = self.kernel(p.chart(), p.coord())?;
        let mu = self.basis.bundle().slope_f64() / VOLUME;
        let rank = self.basis.bundle().rank();
        let resid = &ker.lambda_hat - identity(rank) * c(mu);
        let xi_hat = ker.q.adjoint() * xi * &ker.q;
        Ok(-(xi_hat * resid).trace().re)
    }

    /// sup over the nodes of |eig(Λ̂ − μ)|. Λ̂ is similar to Λ_ωF, so this is
    /// the HE residual without forming h, which over/underflows far out.
    pub fn he_residual_sup(&self, rule: &QuadratureRule) -> Result<f64> {
        let mu = self.basis.bundle().slope_f64() / VOLUME;
        let rank = self.basis.bundle().rank();
        let per_node = rule.map(|p| {
            let ker = self.kernel(p.chart(), p.coord())?;
            let ev = crate::linalg::herm_eigenvalues(&(&ker.lambda_hat - identity(rank) * c(mu)));
            Ok(ev.iter().fold(0.0_f64, |a, v| a.max(v.abs())))
        })?;
        Ok(per_node.into_iter().fold(0.0, f64::max))
    }

    /// Q·(Λ̂ − μ)·Q†, whose integral is the gradient in the coordinates
    /// G = L e^{η} L†.
    pub fn residual_projection(&self, p: &SpherePoint) -> Result<CMat> {
        let ker = self.kernel(p.chart(), p.coord())?;
        let mu = self.basis.bundle().slope_f64() / VOLUME;
        let rank = self.basis.bundle().rank();
        let resid = &ker.lambda_hat - identity(rank) * c(mu);
        Ok(&ker.q * resid * ker.q.adjoint())
    }

    /// h⁻¹ḣ = −R†(Q†ΞQ)R^{−†} for d/dt(G⁻¹) = UΞU†.
    pub fn velocity(&self, xi: &CMat, chart: Chart, coord: C64) -> Result<CMat> {
        let ker = self.kernel(chart, coord)?;
        Ok(-(ker.r.adjoint() * (ker.q.adjoint() * xi * &ker.q) * &ker.r_inv_adj))
    }

    /// ∂_c of `velocity`, in closed form.
    pub fn velocity_derivative(&self, xi: &CMat, chart: Chart, coord: C64) -> Result<CMat> {
        let ker = self.kernel(chart, coord)?;
        let a = self.basis.eval_matrix(chart, coord) * &self.factor;
        let a_prime = self.basis.derivative_matrix(chart, coord) * &self.factor;
        let qr_inv = &ker.q * &ker.r_inv_adj;
        let xi_qr = xi * &qr_inv;
        Ok(-(&a_prime * &xi_qr) + a * xi_qr * (&a_prime * &qr_inv))
    }
}

impl MetricField for FsMetric {
    fn bundle(&self) -> &BundleSpec {
        self.basis.bundle()
    }

    fn eval(&self, chart: Chart, coord: C64) -> Result<CMat> {
        Ok(self.kernel(chart, coord)?.metric(self.basis.level()))
    }

    fn lambda_curvature(&self, chart: Chart, coord: C64) -> Result<CMat> {
        Ok(self.kernel(chart, coord)?.lambda_curvature())
    }

    fn connection(&self, chart: Chart, coord: C64) -> Result<CMat> {
        let ker = self.kernel(chart, coord)?;
        let a_prime = self.basis.derivative_matrix(chart, coord) * &self.factor;
        let k = self.basis.level() as f64;
        let rank = self.basis.bundle().rank();
        let twist = coord.conj() * (k / (1.0 + coord.norm_sqr()));
        Ok(-(a_prime * &ker.q * &ker.r_inv_adj) + identity(rank) * twist)
    }

    fn as_fs(&self) -> Option<&FsMetric> {
        Some(self)
    }
}

pub fn fs_metric(basis: &SectionBasis, gram: &PositiveForm) -> Result<FsMetric> {
    FsMetric::new(basis.clone(), gram)
}

/// FS metric of the L² form of `h`.
pub fn fs_of_metric(basis: &SectionBasis, h: &dyn MetricField, rule: &QuadratureRule) -> Result<FsMetric> {
    FsMetric::new(basis.clone(), &l2_gram(basis, h, rule)?)
}

pub struct BergmanReport {
    pub raw: crate::bundle::EndomorphismField,
    pub normalized: crate::bundle::EndomorphismField,
    /// max over nodes of the spectral deviation of the normalized kernel from Id.
    pub sup_dev: f64,
    /// Same for the raw kernel against (N/(r·Vol))·Id.
    pub raw_mean: f64,
}

/// Raw kernel FS(Gram(h))⁻¹·h and the normalized (r·Vol/N)× version.
pub fn bergman_kernel(h: Arc<dyn MetricField>, k: i64, rule: &QuadratureRule) -> Result<BergmanReport> {
    let basis = SectionBasis::new(h.bundle().clone(), k)?;
    let fs = Arc::new(fs_of_metric(&basis, h.as_ref(), rule)?);
    let norm = h.bundle().rank() as f64 * VOLUME / basis.dim() as f64;
    let devs = rule.map(|p| {
        let ev = pencil_eigenvalues(&h.at(p)?, &fs.at(p)?)?;
        let dev = ev.iter().fold(0.0_f64, |a, v| a.max((v * norm - 1.0).abs()));
        let mean = ev.iter().sum::<f64>() / ev.len() as f64;
        Ok((dev, mean))
    })?;
    let sup_dev = devs.iter().fold(0.0_f64, |a, d| a.max(d.0));
    let raw_mean = devs.iter().map(|d| d.1).sum::<f64>() / devs.len() as f64;
    let (h1, fs1) = (h.clone(), fs.clone());
    let raw: crate::bundle::FieldFn =
        Arc::new(move |chart, coord| Ok(inverse(&fs1.eval(chart, coord)?)? * h1.eval(chart, coord)?));
    let raw2 = raw.clone();
    let normalized: crate::bundle::FieldFn = Arc::new(move |chart, coord| Ok(raw2(chart, coord)? * c(norm)));
    Ok(BergmanReport {
        raw: crate::bundle::EndomorphismField::new(raw, Some(h.clone())),
        normalized: crate::bundle::EndomorphismField::new(normalized, Some(h)),
        sup_dev,
        raw_mean,
    })
}

pub struct PointwiseBoundReport {
    /// min over points and diagonal entries of 2‖ζ‖ − |log ratio|; ≥ 0 when
    /// the sandwich holds.
    pub worst_margin: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub op_norm: f64,
}

/// Diagonal entries of FS(e^ζ G0 e^ζ) against FS(G0).
pub fn fs_pointwise_bound_audit(
    basis: &SectionBasis,
    g0: &PositiveForm,
    zeta: &CMat,
    points: &[SpherePoint],
) -> Result<PointwiseBoundReport> {
    let e = herm_exp(zeta);
    let g = PositiveForm::new(crate::linalg::hermitian_part(&(&e * g0.matrix() * &e)))?;
    let base = FsMetric::new(basis.clone(), g0)?;
    let moved = FsMetric::new(basis.clone(), &g)?;
    let norm = herm_eigen(zeta).0.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut worst = f64::INFINITY;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for p in points {
        let a = base.at(p)?;
        let b = moved.at(p)?;
        for i in 0..a.nrows() {
            let ratio = b[(i, i)].re / a[(i, i)].re;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            worst = worst.min(2.0 * norm - ratio.ln().abs());
        }
    }
    Ok(PointwiseBoundReport {
        worst_margin: worst,
        min_ratio: lo,
        max_ratio: hi,
        op_norm: norm,
    })
}

/// Spectral norm of a matrix; re-exported for report assembly.
pub fn spectral_norm(m: &CMat) -> f64 {
    op_norm(m)
}
