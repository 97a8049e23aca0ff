//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub(crate) fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let scale = 1.0f64.max(a[(i, j)].abs()).max(a[(j, i)].abs());
            if (a[(i, j)] - a[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Lower Cholesky factor, failing with a named error when `a` is not SPD.
pub fn cholesky_lower(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if !is_symmetric(a, 1e-10) {
        return Err(Error::NotPositiveDefinite(format!("{what} is not symmetric")));
    }
    a.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPositiveDefinite(format!("{what}: Cholesky factorization failed")))
}

/// Symmetric inverse square root `A^{-1/2}` via eigendecomposition.
pub fn inverse_sqrt(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if !is_symmetric(a, 1e-10) {
        return Err(Error::NotPositiveDefinite(format!("{what} is not symmetric")));
    }
    let eig = SymmetricEigen::new(a.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if eig.eigenvalues.iter().any(|&v| v <= 1e-12 * max.max(1.0)) {
        return Err(Error::NotPositiveDefinite(format!(
            "{what} has a nonpositive eigenvalue"
        )));
    }
    let scaled = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    let q = &eig.eigenvectors;
    let mut out = q * scaled * q.transpose();
    symmetrize_mean(&mut out);
    Ok(out)
}

/// Inverse of an SPD matrix through its Cholesky factor.
pub fn spd_inverse(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite(format!("{what}: Cholesky factorization failed")))?;
    let mut inv = chol.inverse();
    symmetrize_mean(&mut inv);
    Ok(inv)
}

fn symmetrize_mean(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Largest absolute entry.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_sqrt_squares_back_to_inverse() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let r = inverse_sqrt(&a, "a").unwrap();
        let prod = &r * &a * &r;
        assert!((prod - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(cholesky_lower(&a, "a").is_err());
        assert!(inverse_sqrt(&a, "a").is_err());
    }
}
