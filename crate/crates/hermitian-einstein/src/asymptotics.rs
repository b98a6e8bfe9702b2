//! Bergman rays G_t = e^{−ζt}G0e^{−ζt}, their asymptotic Donaldson slopes,
//! renormalized limits and the coercivity probe.
//!
//! Sections of weight w have norm² ~ e^{−2wt} along the ray, so the
//! subsheaf generated by the top-weight block is the one whose metric
//! shrinks fastest. With this orientation the slope of M(h_t, h_0) is
//! +M^NA(ζ).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bundle::{BundleSpec, MetricField, StandardMetric};
use crate::donaldson::{FsPath, MetricPath};
use crate::geometry::{QuadratureRule, SpherePoint};
use crate::linalg::{c, herm_eigen, hermitian_defect, herm_op_norm, op_norm, real_diag, CMat, C64};
use crate::quot::poly::{self, exact_inverse, gq_norm_sqr, gq_to_f64, ratio, row_reduce};
use crate::quot::{
    filtration, generated_subsheaf, random_weight_spec, singular_locus, FiltrationReport, GaussRational,
    WeightBlock, WeightSpec,
};
use crate::sections::{l2_gram, FsMetric, PositiveForm, SectionBasis};
use crate::{Error, Result};

/// Denominator cap and tolerance for turning floating weights into rationals.
pub const ROUNDING_MAX_DEN: i64 = 64;
pub const ROUNDING_TOL: f64 = 1e-6;

const RAY_T_ORDER: usize = 8;

#[derive(Clone, Debug)]
pub struct OnePSRay {
    basis: SectionBasis,
    g0: PositiveForm,
    zeta: CMat,
    /// Factor applied to the supplied generator to bring ‖ζ‖_op to ≤ 1.
    rescale: f64,
    path: FsPath,
}

impl OnePSRay {
    pub fn new(basis: SectionBasis, g0: PositiveForm, zeta: &CMat) -> Result<Self> {
        let n = basis.dim();
        if zeta.nrows() != n || zeta.ncols() != n {
            return Err(Error::Argument(format!("ζ must be {n}×{n}")));
        }
        let scale = zeta.iter().fold(1.0_f64, |a, x| a.max(x.norm()));
        if hermitian_defect(zeta) > 1e-12 * scale {
            return Err(Error::Argument("ζ is not hermitian".into()));
        }
        let norm = herm_op_norm(zeta);
        let rescale = if norm > 1.0 { 1.0 / norm } else { 1.0 };
        let zeta = crate::linalg::hermitian_part(zeta) * c(rescale);
        let path = FsPath::ray(&basis, &g0, &zeta)?;
        Ok(OnePSRay {
            basis,
            g0,
            zeta,
            rescale,
            path,
        })
    }

    /// The ray of a block-rational generator, rescaled exactly so that the
    /// largest |weight| is at most 1. Returns the rescaled weights too.
    pub fn from_weights(basis: SectionBasis, g0: PositiveForm, zeta: &WeightSpec) -> Result<(Self, WeightSpec)> {
        let top = zeta.op_norm_bound();
        let scaled = if top > BigRational::one() {
            zeta.scaled(&(BigRational::one() / top))?
        } else {
            zeta.clone()
        };
        let ray = OnePSRay::new(basis, g0, &hermitian_generator(&scaled))?;
        Ok((ray, scaled))
    }

    pub fn basis(&self) -> &SectionBasis {
        &self.basis
    }

    pub fn g0(&self) -> &PositiveForm {
        &self.g0
    }

    pub fn zeta(&self) -> &CMat {
        &self.zeta
    }

    pub fn rescale(&self) -> f64 {
        self.rescale
    }

    pub fn path(&self) -> &FsPath {
        &self.path
    }

    pub fn metric_at(&self, t: f64) -> Result<FsMetric> {
        if t < 0.0 {
            return Err(Error::Argument(format!("ray parameter must be ≥ 0, got {t}")));
        }
        self.path.metric_at(t)
    }

    /// M(h_t, h_0) on an increasing grid starting at 0.
    pub fn mdon_on_grid(&self, t_grid: &[f64], rule: &QuadratureRule) -> Result<Vec<f64>> {
        if t_grid.first().is_none_or(|t| *t != 0.0) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("t grid must start at 0 and increase".into()));
        }
        let path = MetricPath::Fs(self.path.clone());
        let pieces: Vec<f64> = t_grid
            .par_windows(2)
            .map(|w| path.integrate_rate(w[0], w[1], RAY_T_ORDER, rule))
            .collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(t_grid.len());
        let mut acc = 0.0;
        out.push(0.0);
        for p in pieces {
            acc += p;
            out.push(acc);
        }
        Ok(out)
    }
}

/// ζ = Σ wᵢPᵢ where Pᵢ projects orthogonally onto the part of block i
/// orthogonal to the earlier blocks. It induces the same flag as the
/// weight decomposition.
pub fn hermitian_generator(zeta: &WeightSpec) -> CMat {
    let n = zeta.dim();
    let mut v = CMat::zeros(n, n);
    let mut weights = Vec::with_capacity(n);
    let mut col = 0;
    for b in zeta.blocks() {
        for vec in &b.vectors {
            for (i, x) in vec.iter().enumerate() {
                v[(i, col)] = gq_to_f64(x);
            }
            weights.push(poly::ratio_to_f64(&b.weight));
            col += 1;
        }
    }
    let q = v.qr().q();
    let zeta = &q * real_diag(&weights) * q.adjoint();
    crate::linalg::hermitian_part(&zeta)
}

pub fn bergman_ray(basis: &SectionBasis, g0: &PositiveForm, zeta: &CMat, t: f64) -> Result<FsMetric> {
    if t < 0.0 {
        return Err(Error::Argument(format!("ray parameter must be ≥ 0, got {t}")));
    }
    FsPath::ray(basis, g0, zeta)?.metric_at(t)
}

/// Best rational approximation of x with denominator ≤ `max_den` among the
/// continued-fraction convergents, the first within `tol`.
pub fn round_rational(x: f64, max_den: i64, tol: f64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut rest = x;
    for _ in 0..64 {
        let a = rest.floor();
        if a.abs() > 1e15 {
            return None;
        }
        let a = a as i64;
        let (p2, q2) = (a.checked_mul(p1)?.checked_add(p0)?, a.checked_mul(q1)?.checked_add(q0)?);
        if q2 > max_den {
            return None;
        }
        if (x - p2 as f64 / q2 as f64).abs() <= tol {
            return Some(ratio(p2, q2));
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = rest - a as f64;
        if frac == 0.0 {
            return None;
        }
        rest = 1.0 / frac;
    }
    None
}

/// Exact basis of the span of the columns, recovered by rounding the
/// orthogonal projector entrywise and row reducing.
pub fn exact_subspace(cols: &CMat, max_den: i64, tol: f64) -> Result<Vec<Vec<GaussRational>>> {
    let dim = cols.ncols();
    let q = cols.clone().qr().q();
    let p = &q * q.adjoint();
    let n = p.nrows();
    let round = |x: f64| {
        round_rational(x, max_den, tol).ok_or_else(|| {
            Error::Numeric(format!(
                "projector entry {x:e} has no rational approximation with denominator ≤ {max_den}"
            ))
        })
    };
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            // row i of conj(P) is column i of P
            let z = p[(j, i)];
            row.push(num_complex::Complex::new(round(z.re)?, round(z.im)?));
        }
        rows.push(row);
    }
    let (rank, _, reduced) = row_reduce(rows);
    if rank != dim {
        return Err(Error::Numeric(format!(
            "rounded projector has rank {rank}, expected {dim}"
        )));
    }
    Ok(reduced.into_iter().take(rank).collect())
}

/// Closest p/q to x with 1 ≤ q ≤ max_den, ties toward smaller q.
pub fn nearest_rational(x: f64, max_den: i64) -> Option<BigRational> {
    if !x.is_finite() || x.abs() > 1e15 {
        return None;
    }
    let mut best = (f64::INFINITY, 0i64, 1i64);
    for q in 1..=max_den.max(1) {
        let p = (x * q as f64).round();
        let err = (x - p / q as f64).abs();
        if err < best.0 {
            best = (err, p as i64, q);
        }
    }
    Some(ratio(best.1, best.2))
}

/// Exact subspace near the span of the columns: the reduced row echelon
/// basis (complete pivoting) with its free entries snapped to the nearest
/// rationals of bounded denominator. Also returns ‖P − P_snapped‖_op.
pub fn snap_subspace(cols: &CMat, max_den: i64) -> Result<(Vec<Vec<GaussRational>>, f64)> {
    let q = cols.clone().qr().q();
    let mut rows = q.transpose();
    let (m, n) = rows.shape();
    let mut pivots = Vec::with_capacity(m);
    for i in 0..m {
        let mut best = (0.0, 0, 0);
        for r in i..m {
            for col in 0..n {
                if pivots.contains(&col) {
                    continue;
                }
                let a = rows[(r, col)].norm();
                if a > best.0 {
                    best = (a, r, col);
                }
            }
        }
        if best.0 < 1e-10 {
            return Err(Error::Numeric("subspace basis is numerically dependent".into()));
        }
        rows.swap_rows(i, best.1);
        let col = best.2;
        let lead = rows[(i, col)];
        let scaled = rows.row(i) / lead;
        rows.set_row(i, &scaled);
        for r in 0..m {
            if r != i {
                let f = rows[(r, col)];
                let sub = rows.row(i) * f;
                let updated = rows.row(r) - sub;
                rows.set_row(r, &updated);
            }
        }
        pivots.push(col);
    }
    let snap = |x: f64| {
        nearest_rational(x, max_den)
            .ok_or_else(|| Error::Numeric(format!("entry {x:e} cannot be snapped to a rational")))
    };
    let mut exact = Vec::with_capacity(m);
    let mut approx = CMat::zeros(n, m);
    for i in 0..m {
        let mut v = Vec::with_capacity(n);
        for col in 0..n {
            let z = rows[(i, col)];
            let e = num_complex::Complex::new(snap(z.re)?, snap(z.im)?);
            approx[(col, i)] = crate::quot::poly::gq_to_f64(&e);
            v.push(e);
        }
        exact.push(v);
    }
    let qa = approx.qr().q();
    let gap = op_norm(&(&q * q.adjoint() - &qa * qa.adjoint()));
    Ok((exact, gap))
}

fn cluster_weights(values: &[f64], max_den: i64, tol: f64) -> Result<Vec<(BigRational, Vec<usize>)>> {
    let mut clusters: Vec<(BigRational, Vec<usize>)> = Vec::new();
    for (i, v) in values.iter().enumerate() {
        let w = round_rational(*v, max_den, tol).ok_or_else(|| {
            Error::Numeric(format!(
                "weight {v} has no rational approximation with denominator ≤ {max_den} within {tol:e}"
            ))
        })?;
        match clusters.iter_mut().find(|(x, _)| *x == w) {
            Some((_, idx)) => idx.push(i),
            None => clusters.push((w, vec![i])),
        }
    }
    clusters.sort_by(|a, b| b.0.cmp(&a.0));
    Ok(clusters)
}

fn cluster_columns(vectors: &CMat, idx: &[usize]) -> CMat {
    let mut cols = CMat::zeros(vectors.nrows(), idx.len());
    for (k, &i) in idx.iter().enumerate() {
        let col = vectors.column(i);
        let scale = col.iter().fold(0.0_f64, |a, x| a.max(x.norm()));
        cols.set_column(k, &(col / c(scale)));
    }
    cols
}

/// Weight decomposition of a diagonalizable generator: eigenvalues rounded
/// to rationals, eigenspaces rounded to exact subspaces.
pub fn weight_spec_from_eigen(
    level: i64,
    values: &[f64],
    vectors: &CMat,
    max_den: i64,
    tol: f64,
) -> Result<WeightSpec> {
    let mut blocks = Vec::new();
    for (w, idx) in cluster_weights(values, max_den, tol)? {
        blocks.push(WeightBlock {
            weight: w,
            vectors: exact_subspace(&cluster_columns(vectors, &idx), max_den, tol)?,
        });
    }
    WeightSpec::new(level, blocks)
}

/// As `weight_spec_from_eigen`, but eigenspaces that are not close to
/// rational ones are snapped; fails when a snap moves a space by more
/// than `max_gap`. Returns the largest gap.
pub fn weight_spec_from_eigen_snapped(
    level: i64,
    values: &[f64],
    vectors: &CMat,
    max_den: i64,
    tol: f64,
    max_gap: f64,
) -> Result<(WeightSpec, f64)> {
    let mut blocks = Vec::new();
    let mut worst = 0.0_f64;
    for (w, idx) in cluster_weights(values, max_den, tol)? {
        let cols = cluster_columns(vectors, &idx);
        let (exact, gap) = match exact_subspace(&cols, max_den, tol) {
            Ok(v) => (v, 0.0),
            Err(_) => snap_subspace(&cols, max_den)?,
        };
        if gap > max_gap {
            return Err(Error::Numeric(format!(
                "weight-{w} space moves by {gap:e} when snapped to a rational subspace"
            )));
        }
        worst = worst.max(gap);
        blocks.push(WeightBlock { weight: w, vectors: exact });
    }
    Ok((WeightSpec::new(level, blocks)?, worst))
}

pub fn weight_spec_from_hermitian(level: i64, zeta: &CMat, max_den: i64, tol: f64) -> Result<WeightSpec> {
    let (values, vectors) = herm_eigen(zeta);
    weight_spec_from_eigen(level, &values, &vectors, max_den, tol)
}

#[derive(Clone, Debug)]
pub struct SlopeReport {
    pub t_grid: Vec<f64>,
    pub mdon_values: Vec<f64>,
    pub fitted_slope: f64,
    pub mna_exact: BigRational,
    /// |fitted − M^NA| / max(1, |M^NA|).
    pub relative_gap: f64,
    /// max over the grid of M^NA·t − M(h_t, h_0).
    pub c_offset: f64,
}

/// Least-squares line through (x, y): (slope, intercept).
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn eigen_weights_match(zeta: &CMat, rational: &WeightSpec) -> bool {
    let mut expected: Vec<f64> = rational
        .blocks()
        .iter()
        .flat_map(|b| std::iter::repeat_n(poly::ratio_to_f64(&b.weight), b.vectors.len()))
        .collect();
    expected.sort_by(f64::total_cmp);
    let got = crate::linalg::herm_eigenvalues(zeta);
    got.len() == expected.len()
        && got.iter().zip(&expected).all(|(g, e)| {
            round_rational(*g, ROUNDING_MAX_DEN, ROUNDING_TOL)
                .is_some_and(|r| (poly::ratio_to_f64(&r) - e).abs() < 1e-12)
        })
}

/// Fit the slope of M(h_t, h_0) over the tail half of [0, t_max] and
/// compare with the exact M^NA.
pub fn slope_estimate(
    ray: &OnePSRay,
    zeta_rational: &WeightSpec,
    t_max: f64,
    n_t: usize,
    rule: &QuadratureRule,
) -> Result<SlopeReport> {
    if t_max < 10.0 {
        return Err(Error::Argument(format!("t_max must be at least 10, got {t_max}")));
    }
    if n_t < 4 {
        return Err(Error::Argument("need at least 4 grid points".into()));
    }
    if !eigen_weights_match(ray.zeta(), zeta_rational) {
        return Err(Error::Argument(
            "rational weights do not match the eigenvalues of the ray generator".into(),
        ));
    }
    let mna = filtration(ray.basis().bundle(), zeta_rational)?.mna;
    let t_grid: Vec<f64> = (0..n_t).map(|i| t_max * i as f64 / (n_t - 1) as f64).collect();
    let mdon = ray.mdon_on_grid(&t_grid, rule)?;
    let tail: Vec<usize> = (0..n_t).filter(|&i| t_grid[i] >= 0.5 * t_max).collect();
    let xs: Vec<f64> = tail.iter().map(|&i| t_grid[i]).collect();
    let ys: Vec<f64> = tail.iter().map(|&i| mdon[i]).collect();
    let (fitted, _) = fit_line(&xs, &ys);
    let m = poly::ratio_to_f64(&mna);
    let c_offset = t_grid
        .iter()
        .zip(&mdon)
        .map(|(t, v)| m * t - v)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SlopeReport {
        relative_gap: (fitted - m).abs() / m.abs().max(1.0),
        t_grid,
        mdon_values: mdon,
        fitted_slope: fitted,
        mna_exact: mna,
        c_offset,
    })
}

#[derive(Clone, Debug)]
pub struct RenormalizedLimit {
    pub t_list: Vec<f64>,
    /// values[j][p]: e^{wt}·h_t·e^{wt} at t_list[j] and point p, in a
    /// weight-adapted unitary frame.
    pub values: Vec<Vec<CMat>>,
    /// Relative sup-difference between consecutive entries of t_list.
    pub cauchy_defects: Vec<f64>,
    /// Positive definiteness of the last value at each point.
    pub pd_flags: Vec<bool>,
    /// Relative size of the entries coupling different weights, per t.
    pub off_diagonal: Vec<f64>,
}

/// A unitary frame of the fibre adapted to the flag spanned by the section
/// blocks at the point, with the weight of each frame vector.
fn adapted_frame(
    basis: &SectionBasis,
    zeta: &WeightSpec,
    report: &FiltrationReport,
    p: &SpherePoint,
) -> Result<(CMat, Vec<f64>, Vec<usize>)> {
    let r = basis.bundle().rank();
    let s = basis.eval_matrix(p.chart(), p.coord());
    let mut frame = CMat::zeros(r, r);
    let mut weights = Vec::with_capacity(r);
    let mut labels = Vec::with_capacity(r);
    let mut filled = 0;
    for (lvl, (block, graded)) in zeta.blocks().iter().zip(&report.graded_ranks).enumerate() {
        if *graded == 0 {
            continue;
        }
        let mut cols = CMat::zeros(r, block.vectors.len());
        for (k, v) in block.vectors.iter().enumerate() {
            let coeffs: Vec<C64> = v.iter().map(gq_to_f64).collect();
            let col = &s * crate::linalg::CVec::from_vec(coeffs);
            cols.set_column(k, &col);
        }
        // remove the part already spanned
        let done = frame.columns(0, filled).into_owned();
        let rest = &cols - &done * (done.adjoint() * &cols);
        let rest_norm = rest.norm();
        let svd = rest.svd(true, false);
        let u = svd.u.ok_or_else(|| Error::Numeric("SVD failed".into()))?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
        for &i in order.iter().take(*graded) {
            if svd.singular_values[i] < 1e-10 * rest_norm.max(1e-300) {
                return Err(Error::eval(
                    format!("{p:?}"),
                    "section blocks do not span the expected fibre flag",
                ));
            }
            frame.set_column(filled, &u.column(i));
            weights.push(poly::ratio_to_f64(&block.weight));
            labels.push(lvl);
            filled += 1;
        }
    }
    if filled != r {
        return Err(Error::eval(format!("{p:?}"), "adapted frame is incomplete"));
    }
    Ok((frame, weights, labels))
}

pub fn renormalized_limit(
    ray: &OnePSRay,
    zeta_rational: &WeightSpec,
    t_list: &[f64],
    points: &[SpherePoint],
) -> Result<RenormalizedLimit> {
    if !eigen_weights_match(ray.zeta(), zeta_rational) {
        return Err(Error::Argument(
            "rational weights do not match the eigenvalues of the ray generator".into(),
        ));
    }
    let basis = ray.basis();
    let report = filtration(basis.bundle(), zeta_rational)?;
    let mut gens = Vec::new();
    for block in zeta_rational.blocks() {
        gens.extend(block.vectors.iter().cloned());
        let bad = singular_locus(&generated_subsheaf(basis, &gens)?);
        for p in points {
            if let Some(q) = bad.iter().find(|q| q.chordal_distance(p) < 1e-2) {
                return Err(Error::Argument(format!(
                    "test point {:?} lies within 10⁻² of the singular point {:?}",
                    p.coord(),
                    q.coord()
                )));
            }
        }
    }
    let frames: Vec<(CMat, Vec<f64>, Vec<usize>)> = points
        .iter()
        .map(|p| adapted_frame(basis, zeta_rational, &report, p))
        .collect::<Result<_>>()?;
    let values: Vec<Vec<CMat>> = t_list
        .par_iter()
        .map(|&t| {
            let h = ray.metric_at(t)?;
            points
                .iter()
                .zip(&frames)
                .map(|(p, (frame, w, _))| {
                    let hm = h.at(p)?;
                    let d: Vec<f64> = w.iter().map(|x| (x * t).exp()).collect();
                    let dd = real_diag(&d);
                    Ok(&dd * (frame.adjoint() * hm * frame) * &dd)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let rel = |a: &CMat, b: &CMat| crate::linalg::max_abs_diff(a, b) / b.norm().max(1e-300);
    let cauchy_defects = values
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).fold(0.0_f64, |m, (a, b)| m.max(rel(b, a))))
        .collect();
    let pd_flags = match values.last() {
        Some(last) => last
            .iter()
            .map(|m| {
                let ev = crate::linalg::herm_eigenvalues(m);
                ev[0] > 1e-12 * ev[ev.len() - 1].abs()
            })
            .collect(),
        None => Vec::new(),
    };
    let off_diagonal = values
        .iter()
        .map(|per_point| {
            per_point.iter().zip(&frames).fold(0.0_f64, |m, (v, (_, _, labels))| {
                let mut off = 0.0_f64;
                for i in 0..labels.len() {
                    for j in 0..labels.len() {
                        if labels[i] != labels[j] {
                            off = off.max(v[(i, j)].norm());
                        }
                    }
                }
                m.max(off / v.norm().max(1e-300))
            })
        })
        .collect();
    Ok(RenormalizedLimit {
        t_list: t_list.to_vec(),
        values,
        cauchy_defects,
        pd_flags,
        off_diagonal,
    })
}

#[derive(Clone, Debug)]
pub struct CoercivityRow {
    pub k: i64,
    pub samples: usize,
    /// max over samples and t of M^NA·t − M(h_t, h_k).
    pub c_k: f64,
    /// M^NA of the sample attaining c_k.
    pub worst_mna: BigRational,
    pub min_mna: BigRational,
}

/// max over samples and grid of M^NA·t − M(h_t, h_0) for rays from FS(g0).
pub fn probe_level(
    basis: &SectionBasis,
    g0: &PositiveForm,
    samples: &[WeightSpec],
    t_grid: &[f64],
    rule: &QuadratureRule,
) -> Result<Vec<(f64, BigRational)>> {
    samples
        .par_iter()
        .map(|z| {
            let (ray, scaled) = OnePSRay::from_weights(basis.clone(), g0.clone(), z)?;
            let mna = filtration(basis.bundle(), &scaled)?.mna;
            let m = poly::ratio_to_f64(&mna);
            let mdon = ray.mdon_on_grid(t_grid, rule)?;
            let c = t_grid.iter().zip(&mdon).map(|(t, v)| m * t - v).fold(f64::NEG_INFINITY, f64::max);
            Ok((c, mna))
        })
        .collect()
}

/// For each level k the reference is FS of the L² form of the standard
/// metric at level k, and random block-rational rays are sampled from it.
pub fn coercivity_probe(
    spec: &BundleSpec,
    k_list: &[i64],
    samples_per_k: usize,
    t_max: f64,
    n_t: usize,
    rule: &QuadratureRule,
    seed: u64,
) -> Result<Vec<CoercivityRow>> {
    if n_t < 2 || t_max <= 0.0 {
        return Err(Error::Argument("need t_max > 0 and at least 2 grid points".into()));
    }
    let t_grid: Vec<f64> = (0..n_t).map(|i| t_max * i as f64 / (n_t - 1) as f64).collect();
    let reference = StandardMetric::new(spec.clone());
    let mut rows = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let basis = SectionBasis::new(spec.clone(), k)?;
        let g0 = l2_gram(&basis, &reference, rule)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let samples: Vec<WeightSpec> = (0..samples_per_k).map(|_| random_weight_spec(&basis, 3, 4, &mut rng)).collect();
        let results = probe_level(&basis, &g0, &samples, &t_grid, rule)?;
        let (c_k, worst) = results
            .iter()
            .fold((0.0_f64, BigRational::zero()), |(m, w), (c, mna)| if *c > m { (*c, mna.clone()) } else { (m, w) });
        let min_mna = results.iter().map(|(_, m)| m.clone()).min().unwrap_or_else(BigRational::zero);
        rows.push(CoercivityRow {
            k,
            samples: samples.len(),
            c_k,
            worst_mna: worst,
            min_mna,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug)]
pub struct JnaPerturbation {
    pub xi: WeightSpec,
    pub changed: bool,
    pub jna_before: BigRational,
    pub jna_after: BigRational,
    /// Exact upper bound for ‖ξ − ζ‖_op²; at most (4ε)².
    pub op_norm_sq_bound: BigRational,
}

/// Keep ζ when J^NA(ζ) ≥ ε. Otherwise pick a vector v of the top block,
/// raise its weight by 2ε and lower every weight by 2ε/N, so the trace is
/// unchanged and ξ − ζ = 2ε(P_v − Id/N) with P_v the projection onto v
/// along the other basis vectors. Then ‖ξ − ζ‖_op ≤ 2ε(‖P_v‖ + 1/N), which
/// is certified exactly to be ≤ 4ε.
pub fn perturb_zeta_for_jna(spec: &BundleSpec, zeta: &WeightSpec, eps: &BigRational) -> Result<JnaPerturbation> {
    let quarter = ratio(1, 4);
    if !eps.is_positive() || *eps >= quarter {
        return Err(Error::Argument(format!(
            "ε_J must lie in (0, 1/4), got {}",
            poly::format_ratio(eps)
        )));
    }
    let n = zeta.dim();
    if n < 2 {
        return Err(Error::Argument("H⁰ is one-dimensional; no room to split a block".into()));
    }
    if spec.rank() < 2 {
        return Err(Error::Argument("a line bundle has J^NA = 0 for every ζ".into()));
    }
    let before = filtration(spec, zeta)?.jna;
    if before >= *eps {
        return Ok(JnaPerturbation {
            xi: zeta.clone(),
            changed: false,
            jna_after: before.clone(),
            jna_before: before,
            op_norm_sq_bound: BigRational::zero(),
        });
    }
    let all: Vec<Vec<GaussRational>> = zeta.blocks().iter().flat_map(|b| b.vectors.iter().cloned()).collect();
    // columns are the basis vectors; rows of the inverse are the dual basis
    let cols: Vec<Vec<GaussRational>> = (0..n).map(|i| all.iter().map(|v| v[i].clone()).collect()).collect();
    let dual = exact_inverse(&cols).ok_or_else(|| Error::Numeric("weight basis is singular".into()))?;
    let norm_sq = |v: &[GaussRational]| v.iter().fold(BigRational::zero(), |a, x| a + gq_norm_sqr(x));
    let top = &zeta.blocks()[0];
    let (pick, proj_sq) = (0..top.vectors.len())
        .map(|j| (j, norm_sq(&top.vectors[j]) * norm_sq(&dual[j])))
        .min_by(|a, b| a.1.cmp(&b.1))
        .expect("blocks are nonempty");
    let nn = BigRational::from_integer(BigInt::from(n));
    let cap = BigRational::from_integer(2.into()) - BigRational::one() / &nn;
    if proj_sq > &cap * &cap {
        return Err(Error::Numeric(format!(
            "no top-block vector has a projection of norm ≤ 2 − 1/N (best ‖P‖² = {})",
            poly::format_ratio(&proj_sq)
        )));
    }
    let two_eps = BigRational::from_integer(2.into()) * eps;
    let shift = &two_eps / &nn;
    let mut blocks = vec![WeightBlock {
        weight: &top.weight + &two_eps - &shift,
        vectors: vec![top.vectors[pick].clone()],
    }];
    let rest: Vec<_> = top.vectors.iter().enumerate().filter(|(j, _)| *j != pick).map(|(_, v)| v.clone()).collect();
    if !rest.is_empty() {
        blocks.push(WeightBlock {
            weight: &top.weight - &shift,
            vectors: rest,
        });
    }
    for b in &zeta.blocks()[1..] {
        blocks.push(WeightBlock {
            weight: &b.weight - &shift,
            vectors: b.vectors.clone(),
        });
    }
    let xi = WeightSpec::new(zeta.level(), blocks)?;
    let after = filtration(spec, &xi)?.jna;
    if after < *eps {
        return Err(Error::Numeric(format!(
            "split produced J^NA = {} < ε_J",
            poly::format_ratio(&after)
        )));
    }
    // (2ε(‖P‖ + 1/N))² ≤ 4ε²(‖P‖² + 2‖P‖/N + 1/N²) with ‖P‖ ≤ cap
    let bound = &two_eps * &two_eps * (&proj_sq + BigRational::from_integer(2.into()) * &cap / &nn + BigRational::one() / (&nn * &nn));
    Ok(JnaPerturbation {
        xi,
        changed: true,
        jna_before: before,
        jna_after: after,
        op_norm_sq_bound: bound,
    })
}

/// M(h^ξ_t, h_0) − M(h^ζ_t, h_0) for the rays of two generators.
pub fn perturbation_mdon_shift(
    basis: &SectionBasis,
    g0: &PositiveForm,
    zeta: &WeightSpec,
    xi: &WeightSpec,
    t: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    let grid = [0.0, t];
    let a = OnePSRay::new(basis.clone(), g0.clone(), &hermitian_generator(xi))?.mdon_on_grid(&grid, rule)?;
    let b = OnePSRay::new(basis.clone(), g0.clone(), &hermitian_generator(zeta))?.mdon_on_grid(&grid, rule)?;
    Ok(a[1] - b[1])
}

pub fn ratio_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or_else(|| poly::ratio_to_f64(x))
}
