use nalgebra::{DVector, Dyn};

use super::{LinalgError, Matrix};
use crate::scalar::Real;

fn require_square<T: Real>(a: &Matrix<T>) -> Result<(), LinalgError> {
    if a.is_square() {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch { expected: "square".into(), got: format!("{}x{}", a.rows(), a.cols()) })
    }
}

fn to_vector<T: Real>(b: &[T]) -> DVector<T::Na> {
    DVector::from_iterator(b.len(), b.iter().map(|&x| x.into_na()))
}

/// Lower-triangular Cholesky factor `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T: Real> {
    inner: nalgebra::Cholesky<T::Na, Dyn>,
    l: Matrix<T>,
}

impl<T: Real> Cholesky<T> {
    /// Fails with `NotPositiveDefinite` when a pivot is not strictly positive.
    /// Only the lower triangle of `a` is read.
    pub fn new(a: &Matrix<T>) -> Result<Self, LinalgError> {
        require_square(a)?;
        if a.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(LinalgError::NotPositiveDefinite);
        }
        let inner = nalgebra::Cholesky::new(a.to_na()).ok_or(LinalgError::NotPositiveDefinite)?;
        let l = Matrix::from_na(&inner.l());
        if (0..l.rows()).any(|i| !(l[(i, i)] > T::zero())) {
            return Err(LinalgError::NotPositiveDefinite);
        }
        Ok(Self { inner, l })
    }

    pub fn factor(&self) -> &Matrix<T> {
        &self.l
    }

    /// `log det A = 2 Σ log L_ii`.
    pub fn log_det(&self) -> T {
        (0..self.l.rows()).map(|i| self.l[(i, i)].ln()).sum::<T>() * T::two()
    }

    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        self.inner.solve(&to_vector(b)).iter().map(|&x| T::from_na(x)).collect()
    }

    /// Solves `A X = B`.
    pub fn solve(&self, b: &Matrix<T>) -> Matrix<T> {
        assert_eq!(b.rows(), self.l.rows());
        Matrix::from_na(&self.inner.solve(&b.to_na()))
    }

    pub fn inverse(&self) -> Matrix<T> {
        Matrix::from_na(&self.inner.inverse())
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu<T: Real> {
    inner: nalgebra::LU<T::Na, Dyn, Dyn>,
    n: usize,
}

impl<T: Real> Lu<T> {
    /// Fails with `Singular` when a pivot falls below `n ε max|A|`.
    pub fn new(a: &Matrix<T>) -> Result<Self, LinalgError> {
        require_square(a)?;
        let n = a.rows();
        let inner = nalgebra::LU::new(a.to_na());
        let u = Matrix::<T>::from_na(&inner.u());
        let floor = T::epsilon() * a.max_abs().max(T::min_positive_value()) * T::lit(n as f64);
        if (0..n).any(|k| !(u[(k, k)].abs() > floor)) {
            return Err(LinalgError::Singular);
        }
        Ok(Self { inner, n })
    }

    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n);
        let x = self.inner.solve(&to_vector(b)).expect("pivots checked at construction");
        x.iter().map(|&v| T::from_na(v)).collect()
    }

    pub fn inverse(&self) -> Result<Matrix<T>, LinalgError> {
        self.inner.try_inverse().map(|m| Matrix::from_na(&m)).ok_or(LinalgError::Singular)
    }
}
