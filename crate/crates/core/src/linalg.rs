//! Dense complex linear-algebra helpers shared by every module.
//!
//! Complex matrices are `nalgebra::DMatrix<Complex64>`. Whenever a complex
//! matrix variable has to enter a real-valued solver it is lifted to the real
//! vector `[Re vec(X); Im vec(X)]` (column-major `vec`), which maps the
//! Frobenius norm onto the Euclidean norm exactly.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Squared Frobenius norm.
pub fn frob2(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn all_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// `(A + A†) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * c(0.5, 0.0)
}

/// Lower Cholesky factor (real positive diagonal) of a Hermitian
/// positive-definite matrix. Only the lower triangle is read.
pub fn cholesky_lower(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::numeric("Cholesky of a non-square matrix"));
    }
    let scale = (0..n).map(|i| a[(i, i)].re.abs()).fold(0.0, f64::max);
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d.is_finite() && d > 1e-300 && d > 1e-30 * scale) {
            return Err(Error::numeric("matrix is not Hermitian positive definite"));
        }
        let djj = d.sqrt();
        l[(j, j)] = c(djj, 0.0);
        for i in (j + 1)..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / djj;
        }
    }
    Ok(l)
}

/// `log|A|` for Hermitian positive-definite `A`, via Cholesky.
pub fn logdet_hpd(a: &CMat) -> Result<f64> {
    if !all_finite(a) {
        return Err(Error::numeric("non-finite entries in log-determinant argument"));
    }
    let l = cholesky_lower(a)?;
    Ok(2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>())
}

/// Inverse of a Hermitian positive-definite matrix, symmetrized.
pub fn inverse_hpd(a: &CMat) -> Result<CMat> {
    let l = cholesky_lower(a)?;
    let linv = l
        .solve_lower_triangular(&identity(a.nrows()))
        .ok_or_else(|| Error::numeric("singular Cholesky factor"))?;
    Ok(hermitian_part(&(linv.adjoint() * linv)))
}

/// Eigenvalues of a Hermitian matrix (ascending).
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    let eig = hermitian_part(a).symmetric_eigenvalues();
    let mut v: Vec<f64> = eig.iter().copied().collect();
    v.sort_by(|x, y| x.total_cmp(y));
    v
}

pub fn max_eigenvalue_hermitian(a: &CMat) -> f64 {
    hermitian_eigenvalues(a)
        .last()
        .copied()
        .unwrap_or(0.0)
}

/// Real-trace inner product `Re Tr(A B)`.
pub fn re_trace_prod(a: &CMat, b: &CMat) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

/// Lift a complex matrix to `[Re vec(X); Im vec(X)]`.
pub fn to_real_vec(x: &CMat) -> DVector<f64> {
    let n = x.len();
    let mut v = DVector::zeros(2 * n);
    for (i, z) in x.iter().enumerate() {
        v[i] = z.re;
        v[n + i] = z.im;
    }
    v
}

/// Inverse of [`to_real_vec`].
pub fn from_real_vec(v: &[f64], rows: usize, cols: usize) -> CMat {
    let n = rows * cols;
    debug_assert_eq!(v.len(), 2 * n);
    CMat::from_fn(rows, cols, |i, j| {
        let idx = i + rows * j;
        c(v[idx], v[n + idx])
    })
}

/// Real matrix of the linear map `X -> C X` on lifted vectors, where `X` has
/// `c.ncols()` rows and `ncols` columns.
pub fn realify_left_mul(cm: &CMat, ncols: usize) -> DMatrix<f64> {
    let (p, m) = (cm.nrows(), cm.ncols());
    let out_n = p * ncols;
    let in_n = m * ncols;
    let mut t = DMatrix::zeros(2 * out_n, 2 * in_n);
    for j in 0..ncols {
        for a in 0..p {
            let row = a + p * j;
            for i in 0..m {
                let col = i + m * j;
                let z = cm[(a, i)];
                t[(row, col)] = z.re;
                t[(row, in_n + col)] = -z.im;
                t[(out_n + row, col)] = z.im;
                t[(out_n + row, in_n + col)] = z.re;
            }
        }
    }
    t
}
