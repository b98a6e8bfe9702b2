//! Exact weight filtrations of H⁰(E(k)) and the saturated subsheaves they
//! generate.
//!
//! A rational weight decomposition w₁ > … > w_ν of H⁰(E(k)) gives subspaces
//! V_{≤−wᵢ} spanned by the blocks of weight ≥ wᵢ. Each generates a subsheaf
//! of E whose saturation E′ᵢ has rank ρᵢ and degree dᵢ, read off from the
//! gcd of maximal minors of the generator matrix. Everything here is exact.

pub mod poly;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;

use crate::bundle::BundleSpec;
use crate::geometry::SpherePoint;
use crate::linalg::{CMat, C64};
use crate::sections::SectionBasis;
use crate::{Error, Result};

pub use poly::{gq, BinaryForm, GaussRational};
use poly::{form_det, forms_gcd, gq_is_zero, gq_to_f64, gq_zero, numeric_roots, row_reduce};

#[derive(Clone, Debug, PartialEq)]
pub struct WeightBlock {
    pub weight: BigRational,
    /// Coefficient vectors in the basis ordering of `SectionBasis`.
    pub vectors: Vec<Vec<GaussRational>>,
}

/// Block-rational generator ζ: weights strictly decreasing, block vectors
/// jointly a basis of H⁰(E(k)).
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSpec {
    level: i64,
    blocks: Vec<WeightBlock>,
}

impl WeightSpec {
    pub fn new(level: i64, blocks: Vec<WeightBlock>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Argument("a weight decomposition needs at least one block".into()));
        }
        for pair in blocks.windows(2) {
            if pair[0].weight <= pair[1].weight {
                return Err(Error::Argument(format!(
                    "weights must be strictly decreasing ({} then {})",
                    poly::format_ratio(&pair[0].weight),
                    poly::format_ratio(&pair[1].weight)
                )));
            }
        }
        let all: Vec<Vec<GaussRational>> = blocks.iter().flat_map(|b| b.vectors.iter().cloned()).collect();
        if blocks.iter().any(|b| b.vectors.is_empty()) {
            return Err(Error::Argument("every weight block needs at least one vector".into()));
        }
        let n = all[0].len();
        if all.iter().any(|v| v.len() != n) || all.len() != n {
            return Err(Error::Argument(format!(
                "block vectors must form a basis: got {} vectors of length {n}",
                all.len()
            )));
        }
        if poly::exact_rank(&all) != n {
            return Err(Error::Argument("block vectors are linearly dependent".into()));
        }
        Ok(WeightSpec { level, blocks })
    }

    /// Weights attached to the standard basis, grouped into blocks.
    pub fn from_coordinate_weights(level: i64, weights: &[BigRational]) -> Result<Self> {
        let n = weights.len();
        let mut distinct: Vec<BigRational> = weights.to_vec();
        distinct.sort_by(|a, b| b.cmp(a));
        distinct.dedup();
        let blocks = distinct
            .into_iter()
            .map(|w| WeightBlock {
                vectors: (0..n)
                    .filter(|&i| weights[i] == w)
                    .map(|i| unit_vector(n, i))
                    .collect(),
                weight: w,
            })
            .collect();
        WeightSpec::new(level, blocks)
    }

    /// One weight per summand, applied to all of its sections.
    pub fn summand_weights(basis: &SectionBasis, weights: &[BigRational]) -> Result<Self> {
        if weights.len() != basis.bundle().rank() {
            return Err(Error::Argument("one weight per summand expected".into()));
        }
        let per: Vec<BigRational> = basis.entries().iter().map(|(i, _)| weights[*i].clone()).collect();
        WeightSpec::from_coordinate_weights(basis.level(), &per)
    }

    pub fn scalar(basis: &SectionBasis, weight: BigRational) -> Self {
        WeightSpec::from_coordinate_weights(basis.level(), &vec![weight; basis.dim()])
            .expect("standard basis is a basis")
    }

    pub fn level(&self) -> i64 {
        self.level
    }

    pub fn blocks(&self) -> &[WeightBlock] {
        &self.blocks
    }

    pub fn weights(&self) -> Vec<BigRational> {
        self.blocks.iter().map(|b| b.weight.clone()).collect()
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.vectors.len()).sum()
    }

    /// Σ dim·w.
    pub fn trace(&self) -> BigRational {
        self.blocks
            .iter()
            .fold(BigRational::zero(), |acc, b| acc + &b.weight * BigRational::from_integer(b.vectors.len().into()))
    }

    /// ζ + c·Id.
    pub fn shifted(&self, c: &BigRational) -> Self {
        let mut out = self.clone();
        for b in &mut out.blocks {
            b.weight = &b.weight + c;
        }
        out
    }

    /// c·ζ for c > 0.
    pub fn scaled(&self, c: &BigRational) -> Result<Self> {
        if !c.is_positive() {
            return Err(Error::Argument("scaling factor must be positive".into()));
        }
        let mut out = self.clone();
        for b in &mut out.blocks {
            b.weight = &b.weight * c;
        }
        Ok(out)
    }

    /// V·diag(w)·V⁻¹ in floating point; hermitian when the blocks are
    /// mutually orthogonal.
    pub fn to_matrix(&self) -> Result<CMat> {
        let n = self.dim();
        let mut v = CMat::zeros(n, n);
        let mut d = Vec::with_capacity(n);
        let mut col = 0;
        for b in &self.blocks {
            for vec in &b.vectors {
                for (i, x) in vec.iter().enumerate() {
                    v[(i, col)] = gq_to_f64(x);
                }
                d.push(poly::ratio_to_f64(&b.weight));
                col += 1;
            }
        }
        Ok(&v * crate::linalg::real_diag(&d) * crate::linalg::inverse(&v)?)
    }

    /// Largest |w|.
    pub fn op_norm_bound(&self) -> BigRational {
        self.blocks.iter().map(|b| b.weight.abs()).max().unwrap_or_else(BigRational::zero)
    }
}

fn unit_vector(n: usize, i: usize) -> Vec<GaussRational> {
    (0..n).map(|j| if i == j { gq(1, 0) } else { gq_zero() }).collect()
}

/// Least positive j with j·wᵢ integral for all i.
pub fn j_of(weights: &[BigRational]) -> BigInt {
    weights.iter().fold(BigInt::one(), |acc, w| acc.lcm(w.denom()))
}

/// Columns are generators; entry (i, col) is a form of degree aᵢ+k.
#[derive(Clone, Debug, PartialEq)]
pub struct SectionMatrix {
    row_degrees: Vec<usize>,
    columns: Vec<Vec<BinaryForm>>,
    level: i64,
}

impl SectionMatrix {
    pub fn rows(&self) -> usize {
        self.row_degrees.len()
    }

    pub fn columns(&self) -> &[Vec<BinaryForm>] {
        &self.columns
    }

    pub fn row_degrees(&self) -> &[usize] {
        &self.row_degrees
    }

    pub fn level(&self) -> i64 {
        self.level
    }

    fn eval(&self, t: &GaussRational) -> Vec<Vec<GaussRational>> {
        (0..self.rows())
            .map(|i| self.columns.iter().map(|col| col[i].eval(t)).collect())
            .collect()
    }

    /// Generic rank over the function field and a set of pivot columns that
    /// realizes it.
    pub fn generic_rank(&self) -> (usize, Vec<usize>) {
        let bound: usize = self.row_degrees.iter().sum();
        let full = self.rows().min(self.columns.len());
        let mut best = (0, Vec::new());
        // a nonzero ρ-minor has at most `bound` roots
        for t0 in 0..=bound as i64 {
            let (rank, pivots, _) = row_reduce(self.eval(&gq(t0, 0)));
            if rank > best.0 {
                best = (rank, pivots);
            }
            if best.0 == full {
                break;
            }
        }
        best
    }

    fn minor(&self, rows: &[usize], cols: &[usize]) -> BinaryForm {
        let m: Vec<Vec<&BinaryForm>> = rows
            .iter()
            .map(|&i| cols.iter().map(|&c| &self.columns[c][i]).collect())
            .collect();
        form_det(&m)
    }
}

/// Homogenize each coefficient vector: the basis section z^j·e_i becomes
/// x₀^{aᵢ+k−j}x₁^j in row i.
pub fn generated_subsheaf(basis: &SectionBasis, vectors: &[Vec<GaussRational>]) -> Result<SectionMatrix> {
    let degrees = basis.bundle().degrees();
    let k = basis.level();
    let row_degrees: Vec<usize> = degrees.iter().map(|a| (a + k) as usize).collect();
    let mut columns = Vec::with_capacity(vectors.len());
    for v in vectors {
        if v.len() != basis.dim() {
            return Err(Error::Argument(format!(
                "coefficient vector has length {} but H⁰ has dimension {}",
                v.len(),
                basis.dim()
            )));
        }
        let mut rows: Vec<Vec<GaussRational>> = row_degrees.iter().map(|d| vec![gq_zero(); d + 1]).collect();
        for (idx, (i, j)) in basis.entries().iter().enumerate() {
            rows[*i][*j] = v[idx].clone();
        }
        columns.push(
            rows.into_iter()
                .zip(&row_degrees)
                .map(|(c, d)| BinaryForm::new(*d, c))
                .collect(),
        );
    }
    Ok(SectionMatrix {
        row_degrees,
        columns,
        level: k,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Saturation {
    pub rank: usize,
    pub degree: i64,
    /// The generators span nothing (rank 0).
    pub trivial: bool,
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    go(0, n, k, &mut cur, &mut out);
    out
}

/// Rank and degree of the saturation of the subsheaf generated by the
/// columns. For a set C of ρ generically independent columns the ρ-minors
/// m_{I,C} are the components of one section of Λ^ρE(ρk) along the line
/// det E′; dividing by their gcd leaves a nowhere vanishing map, so
/// deg E′ = −ρk + deg gcd_I m_{I,C}.
pub fn saturate_rank_degree(m: &SectionMatrix) -> Saturation {
    let (rank, pivots) = m.generic_rank();
    if rank == 0 {
        return Saturation {
            rank: 0,
            degree: 0,
            trivial: true,
        };
    }
    let minors: Vec<BinaryForm> = subsets(m.rows(), rank)
        .iter()
        .map(|rows| m.minor(rows, &pivots))
        .collect();
    let (gcd_degree, _, _) = forms_gcd(minors.iter()).expect("pivot columns give a nonzero minor");
    Saturation {
        rank,
        degree: gcd_degree as i64 - rank as i64 * m.level,
        trivial: false,
    }
}

/// Points where the generated subsheaf is not saturated: common zeros of
/// all maximal minors over every choice of columns.
pub fn singular_locus(m: &SectionMatrix) -> Vec<SpherePoint> {
    let (rank, _) = m.generic_rank();
    if rank == 0 {
        return Vec::new();
    }
    let row_sets = subsets(m.rows(), rank);
    let mut acc: Option<(Vec<GaussRational>, usize)> = None;
    'outer: for cols in subsets(m.columns.len(), rank) {
        for rows in &row_sets {
            let f = m.minor(rows, &cols);
            if f.is_zero() {
                continue;
            }
            let single = forms_gcd([&f]).expect("nonzero");
            acc = Some(match acc {
                None => (single.1, single.2),
                Some((g, inf)) => (poly::poly_gcd(&g, &single.1), inf.min(single.2)),
            });
            if let Some((g, 0)) = &acc {
                if g.len() == 1 {
                    break 'outer;
                }
            }
        }
    }
    let Some((g, inf)) = acc else { return Vec::new() };
    let mut pts: Vec<SpherePoint> = numeric_roots(&g)
        .into_iter()
        .filter_map(|z| SpherePoint::from_z(z).ok())
        .collect();
    if inf > 0 {
        pts.push(SpherePoint::infinity());
    }
    pts
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiltrationLevel {
    pub weight: BigRational,
    /// j·w, an integer.
    pub scaled_weight: BigInt,
    pub rank: usize,
    pub degree: i64,
}

impl FiltrationLevel {
    pub fn slope(&self) -> Option<BigRational> {
        (self.rank > 0).then(|| BigRational::new(self.degree.into(), (self.rank as i64).into()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiltrationReport {
    pub j: BigInt,
    pub mu: BigRational,
    pub levels: Vec<FiltrationLevel>,
    pub graded_ranks: Vec<usize>,
    pub mna: BigRational,
    pub jna: BigRational,
}

impl FiltrationReport {
    /// (2/j)·Σ_q rk(E′_{≤q})(μ − μ(E′_{≤q})) summed over every integer q
    /// from −w̄₁ to −w̄_ν − 1.
    pub fn mna_by_q_sum(&self) -> BigRational {
        let mut total = BigRational::zero();
        for pair in self.levels.windows(2) {
            let (lvl, next) = (&pair[0], &pair[1]);
            let mut q = -lvl.scaled_weight.clone();
            let end = -next.scaled_weight.clone();
            while q < end {
                let rk = BigRational::from_integer(lvl.rank.into());
                total += &rk * &self.mu - BigRational::from_integer(lvl.degree.into());
                q += 1;
            }
        }
        total * BigRational::new(2.into(), self.j.clone())
    }

    /// The level of largest slope when it exceeds μ(E).
    pub fn destabilizing_level(&self) -> Option<&FiltrationLevel> {
        self.levels
            .iter()
            .filter(|l| l.rank > 0 && l.rank < self.levels.last().map_or(0, |t| t.rank))
            .filter(|l| l.slope().is_some_and(|s| s > self.mu))
            .max_by(|a, b| a.slope().cmp(&b.slope()))
    }
}

pub fn filtration(spec: &BundleSpec, zeta: &WeightSpec) -> Result<FiltrationReport> {
    if zeta.level() < spec.regularity() {
        return Err(Error::Argument(format!(
            "level {} is below the regularity {} of {spec}",
            zeta.level(),
            spec.regularity()
        )));
    }
    let basis = SectionBasis::new(spec.clone(), zeta.level())?;
    if zeta.dim() != basis.dim() {
        return Err(Error::Argument(format!(
            "weight decomposition has dimension {} but H⁰(E({})) has dimension {}",
            zeta.dim(),
            zeta.level(),
            basis.dim()
        )));
    }
    let weights = zeta.weights();
    let j = j_of(&weights);
    let jr = BigRational::from_integer(j.clone());
    let mu = BigRational::new(spec.degree().into(), (spec.rank() as i64).into());
    let mut levels = Vec::with_capacity(weights.len());
    let mut gens: Vec<Vec<GaussRational>> = Vec::new();
    for block in zeta.blocks() {
        gens.extend(block.vectors.iter().cloned());
        let sat = saturate_rank_degree(&generated_subsheaf(&basis, &gens)?);
        let scaled = &block.weight * &jr;
        debug_assert!(scaled.is_integer());
        levels.push(FiltrationLevel {
            weight: block.weight.clone(),
            scaled_weight: scaled.to_integer(),
            rank: sat.rank,
            degree: sat.degree,
        });
    }
    let mut graded_ranks = Vec::with_capacity(levels.len());
    let mut prev = 0;
    for l in &levels {
        graded_ranks.push(l.rank - prev);
        prev = l.rank;
    }
    let mut mna = BigRational::zero();
    for pair in levels.windows(2) {
        let gap = &pair[0].weight - &pair[1].weight;
        let defect = BigRational::from_integer(pair[0].rank.into()) * &mu
            - BigRational::from_integer(pair[0].degree.into());
        mna += gap * defect;
    }
    mna *= BigRational::from_integer(2.into());
    let carrying: Vec<&BigRational> = levels
        .iter()
        .zip(&graded_ranks)
        .filter(|(_, g)| **g > 0)
        .map(|(l, _)| &l.weight)
        .collect();
    let jna = match (carrying.iter().max(), carrying.iter().min()) {
        (Some(a), Some(b)) => *a - *b,
        _ => BigRational::zero(),
    };
    Ok(FiltrationReport {
        j,
        mu,
        levels,
        graded_ranks,
        mna,
        jna,
    })
}

pub fn mna(spec: &BundleSpec, zeta: &WeightSpec) -> Result<BigRational> {
    Ok(filtration(spec, zeta)?.mna)
}

pub fn jna(spec: &BundleSpec, zeta: &WeightSpec) -> Result<BigRational> {
    Ok(filtration(spec, zeta)?.jna)
}

/// 1/(r(r−1)): a stable E has μ(E) − μ(F) ≥ 1/(r·rk F) for every proper F.
pub fn slope_gap_constant(spec: &BundleSpec) -> Result<BigRational> {
    let r = spec.rank() as i64;
    if r < 2 {
        return Err(Error::Argument("rank 1 bundles have no proper subsheaves of intermediate rank".into()));
    }
    Ok(BigRational::new(1.into(), (r * (r - 1)).into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stability {
    Stable,
    PolystableNotStable,
    SemistableOnly,
    Unstable,
}

impl Stability {
    pub fn is_semistable(self) -> bool {
        self != Stability::Unstable
    }

    pub fn name(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::PolystableNotStable => "polystable_not_stable",
            Stability::SemistableOnly => "semistable_only",
            Stability::Unstable => "unstable",
        }
    }
}

/// On P¹ a split bundle is stable iff it is a line bundle and polystable iff
/// all summands have the same degree; otherwise the top summand
/// destabilizes.
pub fn stability_classify(spec: &BundleSpec) -> Stability {
    let d = spec.degrees();
    if d.len() == 1 {
        Stability::Stable
    } else if d.iter().all(|a| *a == d[0]) {
        Stability::PolystableNotStable
    } else {
        Stability::Unstable
    }
}

#[derive(Clone, Debug)]
pub struct PositivityReport {
    pub checked: usize,
    pub min_mna: BigRational,
    pub zero_count: usize,
    /// Samples that violated M^NA ≥ 0 (or M^NA ≥ 2c·J^NA when stable).
    pub violations: Vec<(WeightSpec, BigRational)>,
}

pub fn semistable_positivity_audit(spec: &BundleSpec, samples: &[WeightSpec]) -> Result<PositivityReport> {
    let class = stability_classify(spec);
    if !class.is_semistable() {
        return Err(Error::Precondition(format!("{spec} is unstable")));
    }
    let gap = if class == Stability::Stable && spec.rank() >= 2 {
        Some(slope_gap_constant(spec)?)
    } else {
        None
    };
    let mut min_mna: Option<BigRational> = None;
    let mut zero_count = 0;
    let mut violations = Vec::new();
    for z in samples {
        let rep = filtration(spec, z)?;
        let floor = match &gap {
            Some(c) => BigRational::from_integer(2.into()) * c * &rep.jna,
            None => BigRational::zero(),
        };
        if rep.mna < floor {
            violations.push((z.clone(), rep.mna.clone()));
        }
        if rep.mna.is_zero() {
            zero_count += 1;
        }
        min_mna = Some(match min_mna {
            None => rep.mna.clone(),
            Some(m) => m.min(rep.mna.clone()),
        });
    }
    Ok(PositivityReport {
        checked: samples.len(),
        min_mna: min_mna.unwrap_or_else(BigRational::zero),
        zero_count,
        violations,
    })
}

/// Random block decomposition with Gaussian-integer vectors and rational
/// weights of denominator ≤ `max_den`.
pub fn random_weight_spec<R: Rng>(basis: &SectionBasis, max_blocks: usize, max_den: i64, rng: &mut R) -> WeightSpec {
    let n = basis.dim();
    let vectors = loop {
        let vs: Vec<Vec<GaussRational>> = (0..n)
            .map(|_| (0..n).map(|_| gq(rng.random_range(-2..=2), rng.random_range(-1..=1))).collect())
            .collect();
        if poly::exact_rank(&vs) == n {
            break vs;
        }
    };
    let blocks = rng.random_range(1..=max_blocks.clamp(1, n));
    let weights = loop {
        let mut ws: Vec<BigRational> = (0..blocks)
            .map(|_| {
                let q = rng.random_range(1..=max_den.max(1));
                poly::ratio(rng.random_range(-3 * q..=3 * q), q)
            })
            .collect();
        ws.sort_by(|a, b| b.cmp(a));
        ws.dedup();
        if ws.len() == blocks {
            break ws;
        }
    };
    let mut owner: Vec<usize> = (0..n).map(|i| if i < blocks { i } else { rng.random_range(0..blocks) }).collect();
    for i in (1..n).rev() {
        owner.swap(i, rng.random_range(0..=i));
    }
    let blocks = weights
        .into_iter()
        .enumerate()
        .map(|(b, w)| WeightBlock {
            weight: w,
            vectors: (0..n).filter(|&i| owner[i] == b).map(|i| vectors[i].clone()).collect(),
        })
        .collect();
    WeightSpec::new(basis.level(), blocks).expect("random basis is independent")
}

/// Gaussian-rational vector from floating components (used in tests and
/// by numeric callers that already rounded).
pub fn exact_vector(v: &[C64], den: i64) -> Vec<GaussRational> {
    v.iter()
        .map(|z| {
            num_complex::Complex::new(
                poly::ratio((z.re * den as f64).round() as i64, den),
                poly::ratio((z.im * den as f64).round() as i64, den),
            )
        })
        .collect()
}

pub fn is_zero_vector(v: &[GaussRational]) -> bool {
    v.iter().all(gq_is_zero)
}

#[cfg(test)]
mod tests {
    use super::poly::ratio;
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(d: &[i64]) -> BundleSpec {
        BundleSpec::new(d.to_vec()).unwrap()
    }

    fn q(n: i64) -> BigRational {
        ratio(n, 1)
    }

    #[test]
    fn j_examples() {
        assert_eq!(j_of(&[q(1), q(-3)]), BigInt::from(1));
        assert_eq!(j_of(&[ratio(1, 2), ratio(-1, 2)]), BigInt::from(2));
        assert_eq!(j_of(&[ratio(2, 3), ratio(-1, 3)]), BigInt::from(3));
        assert_eq!(j_of(&[ratio(1, 4), ratio(1, 6)]), BigInt::from(12));
    }

    #[test]
    fn homogenized_generators() {
        let basis = SectionBasis::new(spec(&[1, -1]), 1).unwrap();
        let e = unit_vector(4, 3);
        let m = generated_subsheaf(&basis, &[e, vec![gq_zero(); 4]]).unwrap();
        assert_eq!(m.row_degrees(), &[2, 0]);
        assert!(m.columns()[0][0].is_zero());
        assert_eq!(m.columns()[0][1], BinaryForm::new(0, vec![gq(1, 0)]));
        assert!(m.columns()[1].iter().all(|f| f.is_zero()));
        assert!(generated_subsheaf(&basis, &[vec![gq_zero(); 3]]).is_err());
        let full: Vec<_> = (0..4).map(|i| unit_vector(4, i)).collect();
        assert_eq!(generated_subsheaf(&basis, &full).unwrap().generic_rank().0, 2);
    }

    #[test]
    fn saturation_examples() {
        let basis = SectionBasis::new(spec(&[0, 0]), 1).unwrap();
        // (x0, x1): sections 1·e0 + z·e1
        let both = vec![gq(1, 0), gq_zero(), gq_zero(), gq(1, 0)];
        let s = saturate_rank_degree(&generated_subsheaf(&basis, &[both]).unwrap());
        assert_eq!((s.rank, s.degree), (1, -1));
        let first = vec![gq(1, 0), gq_zero(), gq_zero(), gq_zero()];
        let s = saturate_rank_degree(&generated_subsheaf(&basis, &[first]).unwrap());
        assert_eq!((s.rank, s.degree), (1, 0));
        let s = saturate_rank_degree(&generated_subsheaf(&basis, &[vec![gq_zero(); 4]]).unwrap());
        assert!(s.trivial && s.rank == 0);
        for d in [vec![1, -1], vec![2, 0, 0], vec![3, 1]] {
            let b = SectionBasis::new(spec(&d), 2).unwrap();
            let full: Vec<_> = (0..b.dim()).map(|i| unit_vector(b.dim(), i)).collect();
            let s = saturate_rank_degree(&generated_subsheaf(&b, &full).unwrap());
            assert_eq!((s.rank, s.degree), (d.len(), d.iter().sum::<i64>()));
        }
    }

    fn split_example(top_first: bool) -> WeightSpec {
        // O(1)⊕O(−1) at k = 1: three sections of O(2), one of O(0)
        let w = if top_first {
            vec![q(1), q(1), q(1), q(-3)]
        } else {
            vec![q(-1), q(-1), q(-1), q(3)]
        };
        WeightSpec::from_coordinate_weights(1, &w).unwrap()
    }

    #[test]
    fn destabilizing_example() {
        let e = spec(&[1, -1]);
        let rep = filtration(&e, &split_example(true)).unwrap();
        assert_eq!(rep.mna, q(-8));
        assert_eq!(rep.jna, q(4));
        assert_eq!((rep.levels[0].rank, rep.levels[0].degree), (1, 1));
        assert_eq!(rep.mna_by_q_sum(), q(-8));
        assert_eq!(rep.destabilizing_level().unwrap().degree, 1);
        let back = filtration(&e, &split_example(false)).unwrap();
        assert_eq!(back.mna, q(8));
        assert_eq!(back.jna, q(4));
        assert_eq!((back.levels[0].rank, back.levels[0].degree), (1, -1));
        assert_eq!(back.mna_by_q_sum(), q(8));
    }

    #[test]
    fn scalar_weights_are_trivial() {
        let b = SectionBasis::new(spec(&[1, -1]), 1).unwrap();
        let rep = filtration(b.bundle(), &WeightSpec::scalar(&b, ratio(5, 3))).unwrap();
        assert!(rep.mna.is_zero() && rep.jna.is_zero());
    }

    #[test]
    fn weight_spec_validation() {
        let e = vec![gq(1, 0), gq_zero()];
        let f = vec![gq(2, 0), gq_zero()];
        let dependent = WeightSpec::new(
            0,
            vec![
                WeightBlock { weight: q(1), vectors: vec![e.clone()] },
                WeightBlock { weight: q(0), vectors: vec![f] },
            ],
        );
        assert!(dependent.is_err());
        let increasing = WeightSpec::new(
            0,
            vec![
                WeightBlock { weight: q(0), vectors: vec![e.clone()] },
                WeightBlock { weight: q(1), vectors: vec![vec![gq_zero(), gq(1, 0)]] },
            ],
        );
        assert!(increasing.is_err());
        let b = SectionBasis::new(spec(&[1, -1]), 1).unwrap();
        assert!(filtration(&spec(&[1, -1]), &WeightSpec::scalar(&SectionBasis::new(spec(&[1, -1]), 2).unwrap(), q(0))).is_ok());
        let wrong = WeightSpec::from_coordinate_weights(1, &[q(0), q(1)]).unwrap();
        assert!(filtration(b.bundle(), &wrong).is_err());
    }

    #[test]
    fn gap_constant_and_classes() {
        assert_eq!(slope_gap_constant(&spec(&[0, 0])).unwrap(), ratio(1, 2));
        assert_eq!(slope_gap_constant(&spec(&[1, 1, 1])).unwrap(), ratio(1, 6));
        assert!(slope_gap_constant(&spec(&[3])).is_err());
        assert_eq!(stability_classify(&spec(&[3])), Stability::Stable);
        assert_eq!(stability_classify(&spec(&[2, 2])), Stability::PolystableNotStable);
        assert_eq!(stability_classify(&spec(&[1, -1])), Stability::Unstable);
    }

    #[test]
    fn positivity_on_polystable() {
        let e = spec(&[2, 2]);
        let b = SectionBasis::new(e.clone(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut samples: Vec<WeightSpec> = (0..20).map(|_| random_weight_spec(&b, 3, 4, &mut rng)).collect();
        samples.push(WeightSpec::summand_weights(&b, &[q(1), q(0)]).unwrap());
        let rep = semistable_positivity_audit(&e, &samples).unwrap();
        assert!(rep.violations.is_empty());
        assert!(!rep.min_mna.is_negative());
        assert!(rep.zero_count >= 1);
        assert!(matches!(
            semistable_positivity_audit(&spec(&[1, -1]), &[]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn singular_locus_of_vanishing_generator() {
        // the single generator z·e0 of O(0)² at k = 1 vanishes at z = 0
        let b = SectionBasis::new(spec(&[0, 0]), 1).unwrap();
        let v = vec![gq_zero(), gq(1, 0), gq_zero(), gq_zero()];
        let pts = singular_locus(&generated_subsheaf(&b, &[v]).unwrap());
        assert_eq!(pts.len(), 1);
        assert!(pts[0].coord().norm() < 1e-12 && pts[0].chart() == crate::geometry::Chart::Z);
        let w = vec![gq(1, 0), gq_zero(), gq_zero(), gq(1, 0)];
        assert!(singular_locus(&generated_subsheaf(&b, &[w]).unwrap()).is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn shift_and_scale_laws(seed in 0u64..10_000, num in 1i64..6, den in 1i64..5) {
            let e = spec(&[1, 0, -1]);
            let b = SectionBasis::new(e.clone(), 1).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = random_weight_spec(&b, 3, 3, &mut rng);
            let rep = filtration(&e, &z).unwrap();
            let c = ratio(num, den);
            prop_assert_eq!(&jna(&e, &z.shifted(&c)).unwrap(), &rep.jna);
            prop_assert_eq!(mna(&e, &z.scaled(&c).unwrap()).unwrap(), &rep.mna * &c);
            prop_assert_eq!(rep.mna_by_q_sum(), rep.mna.clone());
            for pair in rep.levels.windows(2) {
                prop_assert!(pair[0].rank <= pair[1].rank);
            }
            let top = rep.levels.last().unwrap();
            prop_assert_eq!((top.rank, top.degree), (3, 0));
            for l in &rep.levels {
                // a rank-ρ subsheaf of O(1)⊕O(0)⊕O(−1) has degree ≤ sum of the ρ largest
                let cap = [1i64, 1, 0][l.rank.saturating_sub(1).min(2)];
                prop_assert!(l.rank == 0 || l.degree <= cap);
            }
        }

        #[test]
        fn degree_invariant_under_column_mixing(seed in 0u64..10_000) {
            let e = spec(&[2, 0]);
            let b = SectionBasis::new(e, 1).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = random_weight_spec(&b, 1, 1, &mut rng);
            let gens: Vec<_> = z.blocks()[0].vectors[..3].to_vec();
            let base = saturate_rank_degree(&generated_subsheaf(&b, &gens).unwrap());
            // mix with a random invertible Gaussian-integer matrix
            let mix = loop {
                let m: Vec<Vec<GaussRational>> = (0..3).map(|_| (0..3).map(|_| gq(rng.random_range(-2..=2), rng.random_range(-1..=1))).collect()).collect();
                if poly::exact_rank(&m) == 3 { break m; }
            };
            let mixed: Vec<Vec<GaussRational>> = (0..3).map(|c| {
                (0..b.dim()).map(|i| (0..3).fold(gq_zero(), |acc, r| acc + &mix[r][c] * &gens[r][i])).collect()
            }).collect();
            let after = saturate_rank_degree(&generated_subsheaf(&b, &mixed).unwrap());
            prop_assert_eq!(base, after);
        }
    }
}
