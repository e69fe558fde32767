//! Small dense complex linear-algebra helpers shared by the rate evaluators,
//! the solver and the simulator.

use nalgebra::{DMatrix, Dyn, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;

/// Principal blocks whose minimum eigenvalue falls below this floor are
/// regularized before taking a log-determinant.
pub const LOGDET_FLOOR: f64 = 1e-10;

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> CMat {
    CMat::from_row_iterator(rows, cols, data.iter().map(|&v| C64::new(v, 0.0)))
}

/// `(M + M^H) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Largest entrywise modulus of `M - M^H`.
pub fn asymmetry(m: &CMat) -> f64 {
    let d = m - m.adjoint();
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn trace_re(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Real part of `tr(A B)` without forming the product.
pub fn trace_prod_re(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..a.ncols() {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

pub fn eigh(m: &CMat) -> SymmetricEigen<C64, Dyn> {
    SymmetricEigen::new(hermitian_part(m))
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    eigh(m).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Natural log-determinant through a Cholesky factorization; `None` when the
/// matrix is not numerically positive definite.
pub fn ln_det_pd(m: &CMat) -> Option<f64> {
    let l = cholesky_lower(m)?;
    Some(2.0 * (0..m.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>())
}

/// Lower Cholesky factor of a Hermitian matrix, reading the lower triangle.
/// Fails on any non-positive pivot. (nalgebra's complex Cholesky takes the
/// complex square root of a negative pivot and carries on.)
pub fn cholesky_lower(m: &CMat) -> Option<CMat> {
    let n = m.nrows();
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = C64::new(djj, 0.0);
        for i in j + 1..n {
            let mut v = m[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / djj;
        }
    }
    Some(l)
}

/// Base-2 log-determinant of a Hermitian PSD matrix with the domain guard:
/// when the smallest eigenvalue is below [`LOGDET_FLOOR`] the matrix is
/// shifted by `LOGDET_FLOOR * I`. The flag reports whether that happened.
/// Eigenvalues below `-tol` are rejected.
pub fn log2_det_guarded(m: &CMat, tol: f64) -> std::result::Result<(f64, bool), f64> {
    if m.nrows() == 0 {
        return Ok((0.0, false));
    }
    let eig = eigh(m);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -tol {
        return Err(min);
    }
    let regularized = min < LOGDET_FLOOR;
    let shift = if regularized { LOGDET_FLOOR } else { 0.0 };
    let val = eig
        .eigenvalues
        .iter()
        .map(|&l| (l.max(0.0) + shift).log2())
        .sum();
    Ok((val, regularized))
}

/// Inverse of a Hermitian positive definite matrix.
pub fn inv_pd(m: &CMat) -> Result<CMat> {
    let l = cholesky_lower(&hermitian_part(m)).ok_or_else(|| Error::Numerical("matrix not positive definite".into()))?;
    let n = m.nrows();
    let w = l
        .solve_lower_triangular(&CMat::identity(n, n))
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    Ok(hermitian_part(&(w.adjoint() * w)))
}

/// Moore-Penrose pseudo-inverse of a Hermitian PSD matrix; eigenvalues below
/// `rel_tol * max_eig` are treated as zero.
pub fn pinv_psd(m: &CMat, rel_tol: f64) -> CMat {
    let n = m.nrows();
    if n == 0 {
        return zeros(0, 0);
    }
    let eig = eigh(m);
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cut = rel_tol * max.max(f64::MIN_POSITIVE);
    let mut out = zeros(n, n);
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        if l > cut {
            let v = eig.eigenvectors.column(j);
            out += (&v * v.adjoint()) * C64::new(1.0 / l, 0.0);
        }
    }
    out
}

/// Square root factor `F` with `F F^H = M` for a Hermitian PSD matrix,
/// clipping negative eigenvalues to zero.
pub fn psd_sqrt(m: &CMat) -> CMat {
    let n = m.nrows();
    let eig = eigh(m);
    let mut out = zeros(n, n);
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        for i in 0..n {
            out[(i, j)] = eig.eigenvectors[(i, j)] * s;
        }
    }
    out
}

/// Rows and columns `idx` of `m`.
pub fn submatrix(m: &CMat, rows: &[usize], cols: &[usize]) -> CMat {
    CMat::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn rel_frobenius_error(estimate: &CMat, truth: &CMat) -> f64 {
    (estimate - truth).norm() / truth.norm().max(f64::MIN_POSITIVE)
}

/// `DMatrix<f64>` alias used by the solver.
pub type RMat = DMatrix<f64>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guarded_logdet_flags_singular_blocks() {
        let m = from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let (v, reg) = log2_det_guarded(&m, 1e-9).unwrap();
        assert!(reg);
        assert!((v - (1.0f64 + 1e-10).log2() - (1e-10f64).log2()).abs() < 1e-9);
        let (v, reg) = log2_det_guarded(&identity(3), 1e-9).unwrap();
        assert!(!reg);
        assert_eq!(v, 0.0);
        assert!(log2_det_guarded(&from_real(1, 1, &[-1.0]), 1e-9).is_err());
    }

    #[test]
    fn pinv_and_sqrt_roundtrip() {
        let m = from_real(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let f = psd_sqrt(&m);
        assert!((&f * f.adjoint() - &m).norm() < 1e-12);
        let p = pinv_psd(&m, 1e-12);
        assert!((&m * &p * &m - &m).norm() < 1e-12);
    }

    #[test]
    fn ln_det_matches_eigen_route() {
        let m = from_real(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let a = ln_det_pd(&m).unwrap();
        assert!((a - (1.75f64).ln()).abs() < 1e-14);
        assert!(ln_det_pd(&from_real(1, 1, &[0.0])).is_none());
    }

    #[test]
    fn cholesky_rejects_indefinite_complex() {
        let mut m = from_real(2, 2, &[1.0, 5.0, 5.0, 1.0]);
        m[(1, 0)] += C64::new(0.0, -1e-17);
        m[(0, 1)] += C64::new(0.0, 1e-17);
        assert!(cholesky_lower(&m).is_none());
        assert!(ln_det_pd(&m).is_none());
        let p = from_real(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let l = cholesky_lower(&p).unwrap();
        assert!((&l * l.adjoint() - &p).norm() < 1e-14);
        let inv = inv_pd(&p).unwrap();
        assert!((&inv * &p - identity(2)).norm() < 1e-14);
    }
}
