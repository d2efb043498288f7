//! Identical linear agent dynamics `ẋᵢ = A xᵢ + B uᵢ` and the standing
//! assumptions on `(A, B)`.

use num_complex::Complex;
use serde::Serialize;

use crate::linalg::{eigenvalues, singular_values, LinalgError, Matrix};
use crate::scalar::Real;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Eigenvalues with `Re λ ≥ −MARGINAL_TOL` are included in the PBH sweep.
pub const MARGINAL_TOL: f64 = 1e-9;
/// Relative singular-value threshold for numerical rank.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real + Serialize"))]
pub struct AgentDynamics<T> {
    a: Matrix<T>,
    b: Matrix<T>,
}

impl<T: Real> AgentDynamics<T> {
    pub fn new(a: Matrix<T>, b: Matrix<T>) -> Result<Self, DynamicsError> {
        if !a.is_square() || a.rows() == 0 {
            return Err(DynamicsError::DimensionMismatch(format!("A must be square and nonempty, got {}x{}", a.rows(), a.cols())));
        }
        if b.rows() != a.rows() || b.cols() == 0 {
            return Err(DynamicsError::DimensionMismatch(format!(
                "B must be {}xm with m >= 1, got {}x{}",
                a.rows(),
                b.rows(),
                b.cols()
            )));
        }
        if a.as_slice().iter().chain(b.as_slice()).any(|x| !x.is_finite()) {
            return Err(DynamicsError::BadParameter("A and B must be finite".into()));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn b(&self) -> &Matrix<T> {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.b.cols()
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex<T>>, DynamicsError> {
        Ok(eigenvalues(&self.a)?)
    }

    /// Eigenvalue with the largest real part.
    pub fn rightmost_eigenvalue(&self) -> Result<Complex<T>, DynamicsError> {
        let eig = self.eigenvalues()?;
        Ok(eig.into_iter().fold(Complex::new(T::neg_infinity(), T::zero()), |best, v| if v.re > best.re { v } else { best }))
    }

    /// First non-stable eigenvalue at which `[A − λI, B]` loses rank.
    pub fn uncontrollable_mode(&self) -> Result<Option<Complex<T>>, DynamicsError> {
        let tol = T::tol(MARGINAL_TOL);
        for lambda in self.eigenvalues()? {
            if lambda.re >= -tol && !pbh_full_rank(&self.a, &self.b, lambda) {
                return Ok(Some(lambda));
            }
        }
        Ok(None)
    }

    /// Assumption A1, via the PBH rank test on every eigenvalue with `Re λ ≥ −tol`.
    pub fn check_stabilizable(&self) -> Result<bool, DynamicsError> {
        Ok(self.uncontrollable_mode()?.is_none())
    }

    /// Assumption A2: no eigenvalue of `A` in the open right half plane.
    pub fn check_spectrum_closed_left(&self) -> Result<bool, DynamicsError> {
        Ok(self.rightmost_eigenvalue()?.re <= T::tol(MARGINAL_TOL))
    }
}

/// Rank of the complex `n × (n+m)` matrix `[A − λI, B]` through its real
/// embedding `[[Mr, −Mi], [Mi, Mr]]`, whose rank is twice the complex rank.
fn pbh_full_rank<T: Real>(a: &Matrix<T>, b: &Matrix<T>, lambda: Complex<T>) -> bool {
    let n = a.rows();
    let m = b.cols();
    let w = n + m;
    let mut emb = Matrix::zeros(2 * n, 2 * w);
    for i in 0..n {
        for j in 0..w {
            let (re, im) = if j < n {
                let d = if i == j { lambda } else { Complex::new(T::zero(), T::zero()) };
                (a[(i, j)] - d.re, -d.im)
            } else {
                (b[(i, j - n)], T::zero())
            };
            emb[(i, j)] = re;
            emb[(i, w + j)] = -im;
            emb[(n + i, j)] = im;
            emb[(n + i, w + j)] = re;
        }
    }
    let sv = singular_values(&emb);
    let max = sv.first().copied().unwrap_or(T::zero());
    let min = sv.last().copied().unwrap_or(T::zero());
    max > T::zero() && min > T::tol(RANK_TOL) * max
}

/// Controllable canonical realization of `a / (s (T s + 1))` with the first
/// state as the output (the room temperature).
pub fn realize_room_model<T: Real>(gain: T, time_constant: T) -> Result<AgentDynamics<T>, DynamicsError> {
    if !(gain > T::zero()) || !gain.is_finite() {
        return Err(DynamicsError::BadParameter(format!("a must be positive, got {gain}")));
    }
    if !(time_constant > T::zero()) || !time_constant.is_finite() {
        return Err(DynamicsError::BadParameter(format!("T must be positive, got {time_constant}")));
    }
    let a = Matrix::from_rows(&[[T::zero(), T::one()], [T::zero(), -time_constant.recip()]]);
    let b = Matrix::from_rows(&[[T::zero()], [gain / time_constant]]);
    AgentDynamics::new(a, b)
}
