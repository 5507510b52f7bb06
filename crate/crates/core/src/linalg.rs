//! Small dense helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance used for rank and pseudoinverse cut-offs.
pub const REL_TOL: f64 = 1e-12;

/// Solves `m x = b` for symmetric positive semidefinite `m`.
///
/// Tries a Cholesky factorization first and falls back to the SVD
/// pseudoinverse (cut-off `REL_TOL` relative to the largest singular value)
/// when the factorization fails.
pub fn solve_psd(m: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if let Some(chol) = m.clone().cholesky() {
        let x = chol.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return x;
        }
    }
    pinv_solve(m, b)
}

pub fn pinv_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = REL_TOL * smax.max(f64::MIN_POSITIVE);
    svd.solve(b, eps).expect("svd computed with both factors")
}

pub fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotSpd(format!("{what} is not square")));
    }
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::NotSpd(format!("{what} is not symmetric")));
            }
        }
    }
    Ok(())
}

/// Cholesky factor of a symmetric positive definite matrix, or a `NotSpd` error.
pub fn spd_cholesky(
    m: &DMatrix<f64>,
    what: &str,
) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    check_symmetric(m, what)?;
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotSpd(format!("{what} has no Cholesky factor")))?;
    let l = chol.l_dirty();
    let dmax = (0..l.nrows()).map(|i| l[(i, i)]).fold(0.0, f64::max);
    let dmin = (0..l.nrows())
        .map(|i| l[(i, i)])
        .fold(f64::INFINITY, f64::min);
    if !(dmin > 0.0) || dmin * dmin < REL_TOL * dmax * dmax {
        return Err(Error::NotSpd(format!("{what} is numerically singular")));
    }
    Ok(chol)
}

/// Smallest and largest eigenvalues of a symmetric matrix.
pub fn sym_extreme_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = m.clone().symmetric_eigen();
    let lo = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let hi = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

pub fn all_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}
