//! Exact arithmetic over ℚ(i): scalars, binary forms and small linear
//! algebra.
//!
//! A binary form of degree D is stored through its dehomogenization in
//! t = x₁/x₀: coefficient j multiplies x₀^{D−j}x₁^j.

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type GaussRational = Complex<BigRational>;

pub fn gq(re: i64, im: i64) -> GaussRational {
    Complex::new(BigRational::from_integer(re.into()), BigRational::from_integer(im.into()))
}

pub fn gq_real(x: BigRational) -> GaussRational {
    Complex::new(x, BigRational::zero())
}

pub fn gq_zero() -> GaussRational {
    Complex::new(BigRational::zero(), BigRational::zero())
}

pub fn gq_is_zero(x: &GaussRational) -> bool {
    x.re.is_zero() && x.im.is_zero()
}

pub fn gq_inv(x: &GaussRational) -> GaussRational {
    let n = &x.re * &x.re + &x.im * &x.im;
    Complex::new(&x.re / &n, -&x.im / &n)
}

pub fn ratio_to_f64(x: &BigRational) -> f64 {
    let (n, d) = (x.numer(), x.denom());
    match (n.to_f64(), d.to_f64()) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() => a / b,
        _ => {
            // scale both into range through their bit lengths
            let shift = (n.bits().max(d.bits()) as i64 - 900).max(0) as usize;
            let a = (n >> shift).to_f64().unwrap_or(0.0);
            let b = (d >> shift).to_f64().unwrap_or(1.0);
            a / b
        }
    }
}

pub fn gq_to_f64(x: &GaussRational) -> num_complex::Complex64 {
    num_complex::Complex64::new(ratio_to_f64(&x.re), ratio_to_f64(&x.im))
}

/// |x|² as an exact rational.
pub fn gq_norm_sqr(x: &GaussRational) -> BigRational {
    &x.re * &x.re + &x.im * &x.im
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinaryForm {
    degree: usize,
    /// trailing zeros trimmed; empty for the zero form
    coeffs: Vec<GaussRational>,
}

impl BinaryForm {
    pub fn zero(degree: usize) -> Self {
        BinaryForm {
            degree,
            coeffs: Vec::new(),
        }
    }

    pub fn new(degree: usize, mut coeffs: Vec<GaussRational>) -> Self {
        assert!(coeffs.len() <= degree + 1, "too many coefficients for the degree");
        while coeffs.last().is_some_and(gq_is_zero) {
            coeffs.pop();
        }
        BinaryForm { degree, coeffs }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[GaussRational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Power of x₀ dividing the form: its order of vanishing at t = ∞.
    pub fn order_at_infinity(&self) -> usize {
        self.degree + 1 - self.coeffs.len()
    }

    pub fn mul(&self, other: &BinaryForm) -> BinaryForm {
        let degree = self.degree + other.degree;
        if self.is_zero() || other.is_zero() {
            return BinaryForm::zero(degree);
        }
        let mut out = vec![gq_zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = &out[i + j] + a * b;
            }
        }
        BinaryForm::new(degree, out)
    }

    pub fn add(&self, other: &BinaryForm) -> BinaryForm {
        assert_eq!(self.degree, other.degree, "adding forms of different degree");
        let n = self.coeffs.len().max(other.coeffs.len());
        let out = (0..n)
            .map(|i| {
                let a = self.coeffs.get(i).cloned().unwrap_or_else(gq_zero);
                let b = other.coeffs.get(i).cloned().unwrap_or_else(gq_zero);
                a + b
            })
            .collect();
        BinaryForm::new(self.degree, out)
    }

    pub fn neg(&self) -> BinaryForm {
        BinaryForm {
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| -c.clone()).collect(),
        }
    }

    pub fn scale(&self, s: &GaussRational) -> BinaryForm {
        BinaryForm::new(self.degree, self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Value at x₀ = 1, x₁ = t.
    pub fn eval(&self, t: &GaussRational) -> GaussRational {
        let mut acc = gq_zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * t + c;
        }
        acc
    }
}

/// Monic gcd of univariate polynomials in t (coefficients low to high).
pub fn poly_gcd(a: &[GaussRational], b: &[GaussRational]) -> Vec<GaussRational> {
    let mut x = trim(a.to_vec());
    let mut y = trim(b.to_vec());
    while !y.is_empty() {
        let r = poly_rem(&x, &y);
        x = y;
        y = r;
    }
    monic(x)
}

fn trim(mut p: Vec<GaussRational>) -> Vec<GaussRational> {
    while p.last().is_some_and(gq_is_zero) {
        p.pop();
    }
    p
}

fn monic(p: Vec<GaussRational>) -> Vec<GaussRational> {
    match p.last() {
        None => p,
        Some(lead) => {
            let inv = gq_inv(lead);
            p.iter().map(|c| c * &inv).collect()
        }
    }
}

fn poly_rem(a: &[GaussRational], b: &[GaussRational]) -> Vec<GaussRational> {
    let mut r = a.to_vec();
    let lead_inv = gq_inv(b.last().expect("division by the zero polynomial"));
    while r.len() >= b.len() {
        let shift = r.len() - b.len();
        let f = r.last().unwrap() * &lead_inv;
        for (i, c) in b.iter().enumerate() {
            r[shift + i] = &r[shift + i] - &f * c;
        }
        r.pop();
        r = trim(r);
    }
    r
}

/// Exact quotient a / b of univariate polynomials; b must divide a.
pub fn poly_div_exact(a: &[GaussRational], b: &[GaussRational]) -> Vec<GaussRational> {
    let mut r = trim(a.to_vec());
    let b = trim(b.to_vec());
    if r.is_empty() {
        return r;
    }
    let lead_inv = gq_inv(b.last().expect("division by the zero polynomial"));
    let mut q = vec![gq_zero(); r.len() + 1 - b.len()];
    while r.len() >= b.len() && !r.is_empty() {
        let shift = r.len() - b.len();
        let f = r.last().unwrap() * &lead_inv;
        for (i, c) in b.iter().enumerate() {
            r[shift + i] = &r[shift + i] - &f * c;
        }
        q[shift] = f;
        r.pop();
        r = trim(r);
    }
    debug_assert!(r.is_empty(), "inexact polynomial division");
    q
}

/// gcd of nonzero binary forms: (degree of the gcd, the univariate part in t,
/// the power of x₀). `None` when every form is zero.
pub fn forms_gcd<'a, I>(forms: I) -> Option<(usize, Vec<GaussRational>, usize)>
where
    I: IntoIterator<Item = &'a BinaryForm>,
{
    let mut acc: Option<(Vec<GaussRational>, usize)> = None;
    for f in forms {
        if f.is_zero() {
            continue;
        }
        acc = Some(match acc {
            None => (monic(f.coeffs.clone()), f.order_at_infinity()),
            Some((g, inf)) => (poly_gcd(&g, &f.coeffs), inf.min(f.order_at_infinity())),
        });
    }
    acc.map(|(g, inf)| (g.len() - 1 + inf, g, inf))
}

/// Determinant of a square matrix of binary forms with homogeneous rows.
pub fn form_det(m: &[Vec<&BinaryForm>]) -> BinaryForm {
    let n = m.len();
    if n == 1 {
        return m[0][0].clone();
    }
    let total: usize = m.iter().map(|row| row[0].degree()).sum();
    let mut acc = BinaryForm::zero(total);
    for col in 0..n {
        if m[0][col].is_zero() {
            continue;
        }
        let minor: Vec<Vec<&BinaryForm>> = m[1..]
            .iter()
            .map(|row| row.iter().enumerate().filter(|(j, _)| *j != col).map(|(_, f)| *f).collect())
            .collect();
        let term = m[0][col].mul(&form_det(&minor));
        acc = if col % 2 == 0 { acc.add(&term) } else { acc.add(&term.neg()) };
    }
    acc
}

/// Row reduction of an exact matrix (rows × cols, row-major); returns the
/// rank and the pivot columns in order.
pub fn row_reduce(mut m: Vec<Vec<GaussRational>>) -> (usize, Vec<usize>, Vec<Vec<GaussRational>>) {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !gq_is_zero(&m[i][c])) else {
            continue;
        };
        m.swap(r, p);
        let inv = gq_inv(&m[r][c]);
        for x in m[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..rows {
            if i != r && !gq_is_zero(&m[i][c]) {
                let f = m[i][c].clone();
                for j in 0..cols {
                    let delta = &f * &m[r][j];
                    m[i][j] = &m[i][j] - delta;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    (r, pivots, m)
}

/// Rank of a set of exact vectors.
pub fn exact_rank(vectors: &[Vec<GaussRational>]) -> usize {
    row_reduce(vectors.to_vec()).0
}

/// Inverse of an exact square matrix given row-major, or `None` if singular.
pub fn exact_inverse(m: &[Vec<GaussRational>]) -> Option<Vec<Vec<GaussRational>>> {
    let n = m.len();
    let aug: Vec<Vec<GaussRational>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { gq(1, 0) } else { gq_zero() }));
            r
        })
        .collect();
    let (rank, pivots, red) = row_reduce(aug);
    if rank < n || pivots.iter().any(|&p| p >= n) {
        return None;
    }
    Some(red.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Roots of a univariate polynomial (low to high coefficients) by the
/// Aberth iteration in floating point.
pub fn numeric_roots(p: &[GaussRational]) -> Vec<num_complex::Complex64> {
    use num_complex::Complex64;
    let coeffs: Vec<Complex64> = trim(p.to_vec()).iter().map(gq_to_f64).collect();
    let n = coeffs.len().saturating_sub(1);
    if n == 0 {
        return Vec::new();
    }
    let lead = coeffs[n];
    let a: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    let radius = 1.0 + a[..n].iter().fold(0.0_f64, |m, c| m.max(c.norm()));
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(radius * 0.5, 0.4 + 2.0 * std::f64::consts::PI * k as f64 / n as f64))
        .collect();
    let eval = |x: Complex64| {
        let mut v = Complex64::new(1.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for c in a[..n].iter().rev() {
            d = d * x + v;
            v = v * x + c;
        }
        (v, d)
    };
    for _ in 0..500 {
        let mut moved = 0.0_f64;
        for i in 0..n {
            let (v, d) = eval(z[i]);
            if v.norm() == 0.0 {
                continue;
            }
            let ratio = v / d;
            let sum: Complex64 = (0..n).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * sum);
            z[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-15 * radius {
            break;
        }
    }
    z
}

pub fn big(n: i64) -> BigInt {
    BigInt::from(n)
}

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// "p/q" (or "p" for integers).
pub fn format_ratio(x: &BigRational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn abs_ratio(x: &BigRational) -> BigRational {
    x.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn form(d: usize, c: &[(i64, i64)]) -> BinaryForm {
        BinaryForm::new(d, c.iter().map(|(a, b)| gq(*a, *b)).collect())
    }

    #[test]
    fn products_and_evaluation() {
        // (x0 + x1)(x0 − i x1) = x0² + (1 − i)x0x1 − i x1²
        let p = form(1, &[(1, 0), (1, 0)]).mul(&form(1, &[(1, 0), (0, -1)]));
        assert_eq!(p.coeffs(), &[gq(1, 0), gq(1, -1), gq(0, -1)]);
        assert_eq!(p.eval(&gq(2, 0)), gq(1, 0) + gq(2, -2) + gq(0, -4));
    }

    #[test]
    fn gcd_with_points_at_infinity() {
        // x0·x1 and x0² share x0
        let a = form(2, &[(0, 0), (1, 0)]);
        let b = form(2, &[(1, 0)]);
        let (deg, uni, inf) = forms_gcd([&a, &b]).unwrap();
        assert_eq!((deg, inf), (1, 1));
        assert_eq!(uni, vec![gq(1, 0)]);
        // x0 and x1 are coprime
        let (deg, _, _) = forms_gcd([&form(1, &[(1, 0)]), &form(1, &[(0, 0), (1, 0)])]).unwrap();
        assert_eq!(deg, 0);
        assert!(forms_gcd([&BinaryForm::zero(3)]).is_none());
    }

    #[test]
    fn gcd_of_shared_gaussian_factor() {
        // (t − i)(t + 2) and (t − i)(t − 3)
        let f = form(1, &[(0, -1), (1, 0)]);
        let a = f.mul(&form(1, &[(2, 0), (1, 0)]));
        let b = f.mul(&form(1, &[(-3, 0), (1, 0)]));
        let (deg, uni, _) = forms_gcd([&a, &b]).unwrap();
        assert_eq!(deg, 1);
        assert_eq!(uni, vec![gq(0, -1), gq(1, 0)]);
        assert_eq!(poly_div_exact(a.coeffs(), &uni), vec![gq(2, 0), gq(1, 0)]);
    }

    #[test]
    fn determinant_of_forms() {
        let a = form(1, &[(1, 0)]);
        let b = form(1, &[(0, 0), (1, 0)]);
        let z = BinaryForm::zero(1);
        let det = form_det(&[vec![&a, &b], vec![&z, &a]]);
        assert_eq!(det, form(2, &[(1, 0)]));
    }

    #[test]
    fn inverse_and_rank() {
        let m = vec![vec![gq(1, 1), gq(2, 0)], vec![gq(0, 0), gq(0, 1)]];
        let inv = exact_inverse(&m).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut s = gq_zero();
                for k in 0..2 {
                    s = s + &m[i][k] * &inv[k][j];
                }
                assert_eq!(s, if i == j { gq(1, 0) } else { gq_zero() });
            }
        }
        assert_eq!(exact_rank(&[vec![gq(1, 0), gq(2, 0)], vec![gq(2, 0), gq(4, 0)]]), 1);
        assert!(exact_inverse(&[vec![gq(1, 0), gq(2, 0)], vec![gq(2, 0), gq(4, 0)]]).is_none());
    }

    #[test]
    fn numeric_roots_of_cubic() {
        // (t − 1)(t + 2)(t − i)
        let p = form(1, &[(-1, 0), (1, 0)])
            .mul(&form(1, &[(2, 0), (1, 0)]))
            .mul(&form(1, &[(0, -1), (1, 0)]));
        let mut roots = numeric_roots(p.coeffs());
        roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let expect = [(-2.0, 0.0), (0.0, 1.0), (1.0, 0.0)];
        for (r, (a, b)) in roots.iter().zip(expect) {
            assert!((r - num_complex::Complex64::new(a, b)).norm() < 1e-10);
        }
    }
}
