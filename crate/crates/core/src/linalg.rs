//! Symmetric positive definite matrices with a cached Cholesky factor.

use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{Error, Result};

/// A covariance-like matrix together with its lower Cholesky factor,
/// inverse and log-determinant.
///
/// Quadratic forms go through triangular solves against the factor; the
/// explicit inverse is kept only for reporting and callers that want it.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    matrix: DMatrix<f64>,
    chol: DMatrix<f64>,
    inverse: DMatrix<f64>,
    log_det: f64,
}

impl SpdMatrix {
    /// Factorizes `matrix`, which must be square, symmetric to a relative
    /// `1e-10`, and positive definite.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let p = matrix.nrows();
        if p == 0 || matrix.ncols() != p {
            return Err(Error::DimensionMismatch { expected: p, got: matrix.ncols() });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        let scale = matrix.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..p {
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::NotPositiveDefinite);
                }
            }
        }
        let chol = matrix.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let l = chol.l();
        let log_det = 2.0 * (0..p).map(|i| l[(i, i)].ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let inverse = chol.inverse();
        Ok(SpdMatrix { matrix, chol: l, inverse, log_det })
    }

    pub fn identity(p: usize) -> Self {
        SpdMatrix::new(DMatrix::identity(p, p)).expect("identity is positive definite")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Lower-triangular `L` with `L Lᵀ = Σ`.
    pub fn cholesky_lower(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Solves `L y = v` in place.
    pub fn whiten_in_place(&self, v: &mut [f64]) {
        let p = self.dim();
        debug_assert_eq!(v.len(), p);
        for i in 0..p {
            let mut s = v[i];
            for k in 0..i {
                s -= self.chol[(i, k)] * v[k];
            }
            v[i] = s / self.chol[(i, i)];
        }
    }

    pub fn whiten(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        self.whiten_in_place(&mut out);
        out
    }

    /// `vᵀ Σ⁻¹ v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        self.whiten(v).iter().map(|y| y * y).sum()
    }
}

/// Symmetrizes `m` and, when its smallest eigenvalue is not safely
/// positive, adds `(|λ_min| + 1e-8 · trace/p) · I` once.
///
/// Returns `None` when the result still fails to factorize.
pub(crate) fn repair_covariance(mut m: DMatrix<f64>) -> Option<SpdMatrix> {
    let p = m.nrows();
    let sym = (&m + m.transpose()) * 0.5;
    m = sym;
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let trace = m.trace();
    let floor = 1e-8 * (trace / p as f64).abs();
    let lambda_min = SymmetricEigen::new(m.clone()).eigenvalues.min();
    if lambda_min <= 1e-10 * (trace / p as f64).abs() {
        let ridge = lambda_min.abs() + floor.max(f64::MIN_POSITIVE);
        for i in 0..p {
            m[(i, i)] += ridge;
        }
    }
    SpdMatrix::new(m).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0])
    }

    #[test]
    fn factor_reconstructs_matrix() {
        let s = SpdMatrix::new(sample()).unwrap();
        let l = s.cholesky_lower();
        let back = l * l.transpose();
        for (a, b) in back.iter().zip(sample().iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        assert_relative_eq!(s.log_det(), sample().determinant().ln(), epsilon = 1e-12);
    }

    #[test]
    fn quad_form_matches_inverse() {
        let s = SpdMatrix::new(sample()).unwrap();
        let v = [1.0, -2.0, 0.5];
        let dv = nalgebra::DVector::from_column_slice(&v);
        let direct = (dv.transpose() * s.inverse() * &dv)[(0, 0)];
        assert_relative_eq!(s.quad_form(&v), direct, epsilon = 1e-12);
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(SpdMatrix::new(bad), Err(Error::NotPositiveDefinite));
        let skew = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 1.0]);
        assert_eq!(SpdMatrix::new(skew), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn repair_adds_ridge_to_singular_matrix() {
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let fixed = repair_covariance(singular).unwrap();
        let eig = SymmetricEigen::new(fixed.matrix().clone()).eigenvalues;
        assert!(eig.min() > 0.0);
        let ok = repair_covariance(sample()).unwrap();
        assert_eq!(ok.matrix(), &sample());
    }
}
