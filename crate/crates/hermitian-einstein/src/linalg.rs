//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn real_diag(values: &[f64]) -> CMat {
    let mut m = CMat::zeros(values.len(), values.len());
    for (i, v) in values.iter().enumerate() {
        m[(i, i)] = c(*v);
    }
    m
}

pub fn scale(m: &CMat, s: f64) -> CMat {
    m.map(|x| x * s)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).map(|x| x * 0.5)
}

/// Frobenius norm of the anti-hermitian part.
pub fn hermitian_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).norm() * 0.5
}

pub fn trace(m: &CMat) -> C64 {
    m.trace()
}

/// Eigen-decomposition of the hermitian part of `m`, eigenvalues ascending.
pub fn herm_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn herm_eigenvalues(m: &CMat) -> Vec<f64> {
    herm_eigen(m).0
}

/// f(m) for hermitian m through its spectral decomposition.
pub fn herm_apply(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (values, vectors) = herm_eigen(m);
    let mapped: Vec<f64> = values.iter().map(|&v| f(v)).collect();
    &vectors * real_diag(&mapped) * vectors.adjoint()
}

pub fn herm_exp(m: &CMat) -> CMat {
    herm_apply(m, f64::exp)
}

pub fn herm_log(m: &CMat) -> Result<CMat> {
    let (values, vectors) = herm_eigen(m);
    if let Some(bad) = values.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Numeric(format!(
            "matrix logarithm of a non-positive hermitian matrix (eigenvalue {bad:e})"
        )));
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    Ok(&vectors * real_diag(&logs) * vectors.adjoint())
}

pub fn herm_pow(m: &CMat, p: f64) -> Result<CMat> {
    let (values, vectors) = herm_eigen(m);
    if let Some(bad) = values.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Numeric(format!(
            "matrix power of a non-positive hermitian matrix (eigenvalue {bad:e})"
        )));
    }
    let pw: Vec<f64> = values.iter().map(|v| v.powf(p)).collect();
    Ok(&vectors * real_diag(&pw) * vectors.adjoint())
}

pub fn herm_sqrt(m: &CMat) -> Result<CMat> {
    herm_pow(m, 0.5)
}

pub fn herm_inv_sqrt(m: &CMat) -> Result<CMat> {
    herm_pow(m, -0.5)
}

/// Largest |eigenvalue| of the hermitian part.
pub fn herm_op_norm(m: &CMat) -> f64 {
    herm_eigenvalues(m)
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Spectral norm (largest singular value).
pub fn op_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(*v))
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Numeric("singular matrix".into()))
}

/// Lower Cholesky factor of a hermitian positive definite matrix. Fails when a
/// pivot drops below `1e-14·‖m‖`.
pub fn cholesky(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    let h = hermitian_part(m);
    let scale = h.norm().max(f64::MIN_POSITIVE);
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = h[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 1e-14 * scale) {
            return Err(Error::Numeric(format!(
                "Cholesky pivot {j} is {d:e} (matrix norm {scale:e}); not positive definite"
            )));
        }
        let djj = d.sqrt();
        l[(j, j)] = c(djj);
        for i in (j + 1)..n {
            let mut s = h[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

pub fn is_positive_definite(m: &CMat) -> bool {
    cholesky(m).is_ok()
}

/// Eigenvalues of b⁻¹a for hermitian a and positive definite b, ascending.
pub fn pencil_eigenvalues(a: &CMat, b: &CMat) -> Result<Vec<f64>> {
    let l = cholesky(b)?;
    let li = l
        .clone()
        .solve_lower_triangular(&identity(l.nrows()))
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
    let reduced = &li * a * li.adjoint();
    Ok(herm_eigenvalues(&reduced))
}

/// Entrywise max-abs distance.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().fold(0.0_f64, |acc, x| acc.max(x.norm()))
}

pub fn all_finite(m: &CMat) -> bool {
    m.iter().all(|x| x.re.is_finite() && x.im.is_finite())
}

/// Random hermitian matrix with entries of size ~`amplitude`.
pub fn random_hermitian<R: rand::Rng>(n: usize, amplitude: f64, rng: &mut R) -> CMat {
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = c(amplitude * (2.0 * rng.random::<f64>() - 1.0));
        for j in (i + 1)..n {
            let z = C64::new(
                2.0 * rng.random::<f64>() - 1.0,
                2.0 * rng.random::<f64>() - 1.0,
            ) * (amplitude * std::f64::consts::FRAC_1_SQRT_2);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exp_log_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_hermitian(4, 0.7, &mut rng);
        let back = herm_log(&herm_exp(&x)).unwrap();
        assert!(max_abs_diff(&x, &back) < 1e-12);
    }

    #[test]
    fn cholesky_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = herm_exp(&random_hermitian(5, 1.0, &mut rng));
        let l = cholesky(&g).unwrap();
        assert!(max_abs_diff(&(&l * l.adjoint()), &g) < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        assert!(cholesky(&real_diag(&[1.0, -1.0])).is_err());
        assert!(cholesky(&real_diag(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn pencil_of_proportional_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = herm_exp(&random_hermitian(3, 1.0, &mut rng));
        let ev = pencil_eigenvalues(&scale(&b, 2.5), &b).unwrap();
        for v in ev {
            assert!((v - 2.5).abs() < 1e-12);
        }
    }
}
