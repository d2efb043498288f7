//! Eigenvalue routines.
//!
//! Symmetric matrices use `nalgebra`'s tridiagonal QR iteration. General real
//! matrices go through its real Schur decomposition.

use num_complex::Complex;

use super::{LinalgError, Matrix};
use crate::scalar::Real;

const MAX_ITERATIONS: usize = 10_000;

/// Eigen-decomposition `A = V diag(values) Vᵀ` of a symmetric matrix.
/// Eigenvalues are ascending; columns of `vectors` are orthonormal.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

fn require_square<T: Real>(a: &Matrix<T>) -> Result<(), LinalgError> {
    if a.is_square() {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch { expected: "square".into(), got: format!("{}x{}", a.rows(), a.cols()) })
    }
}

/// Symmetric eigen-decomposition. Only the lower triangle of `a` is read.
pub fn symmetric_eigen<T: Real>(a: &Matrix<T>) -> Result<SymmetricEigen<T>, LinalgError> {
    require_square(a)?;
    let n = a.rows();
    if n == 0 {
        return Ok(SymmetricEigen { values: vec![], vectors: Matrix::zeros(0, 0) });
    }
    let lower = Matrix::from_fn(n, n, |i, j| if i >= j { a[(i, j)] } else { a[(j, i)] });
    if lower.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(LinalgError::NoConvergence);
    }
    let eig = nalgebra::SymmetricEigen::try_new(lower.to_na(), T::epsilon().into_na(), MAX_ITERATIONS)
        .ok_or(LinalgError::NoConvergence)?;
    let raw: Vec<T> = eig.eigenvalues.iter().map(|&v| T::from_na(v)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| raw[p].partial_cmp(&raw[q]).expect("finite eigenvalues"));
    let values = order.iter().map(|&k| raw[k]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| T::from_na(eig.eigenvectors[(i, order[j])]));
    Ok(SymmetricEigen { values, vectors })
}

/// Eigenvalues of a general real square matrix, in no particular order.
/// Complex eigenvalues appear in conjugate pairs.
pub fn eigenvalues<T: Real>(a: &Matrix<T>) -> Result<Vec<Complex<T>>, LinalgError> {
    require_square(a)?;
    if a.rows() == 0 {
        return Ok(vec![]);
    }
    if a.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(LinalgError::NoConvergence);
    }
    let schur = nalgebra::Schur::try_new(a.to_na(), T::epsilon().into_na(), MAX_ITERATIONS)
        .ok_or(LinalgError::NoConvergence)?;
    Ok(schur.complex_eigenvalues().iter().map(|z| Complex::new(T::from_na(z.re), T::from_na(z.im))).collect())
}
