//! Cyclic Jacobi eigenvalue iteration for symmetric matrices.
//!
//! Slower than the QL path in `eigen` but numerically independent of it;
//! certification relies on that independence.

use super::{LinalgError, Matrix};
use crate::scalar::Real;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues of the symmetric part of `a`, ascending.
pub fn jacobi_eigenvalues<T: Real>(a: &Matrix<T>) -> Result<Vec<T>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::DimensionMismatch {
            expected: "square".into(),
            got: format!("{}x{}", a.rows(), a.cols()),
        });
    }
    let n = a.rows();
    let mut m = a.symmetric_part();
    let zero = T::zero();
    for _ in 0..MAX_SWEEPS {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let diag: T = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum();
        if off <= T::epsilon() * T::epsilon() * diag || off == zero {
            let mut values: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
            values.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
            return Ok(values);
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == zero {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::two() * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    Err(LinalgError::NoConvergence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eigen;

    #[test]
    fn agrees_with_ql_path() {
        let a = Matrix::from_fn(6, 6, |i, j| {
            let (i, j) = (i.min(j), i.max(j));
            ((i * 5 + j * 11) % 7) as f64 - 3.0 + if i == j { 0.5 * i as f64 } else { 0.0 }
        });
        let j = jacobi_eigenvalues(&a).unwrap();
        let q = symmetric_eigen(&a).unwrap().values;
        for (x, y) in j.iter().zip(&q) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn diagonal_is_fixed_point() {
        let a = Matrix::diag(&[3.0, -1.0, 2.0]);
        assert_eq!(jacobi_eigenvalues(&a).unwrap(), vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn uses_symmetric_part_only() {
        let a = Matrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]);
        assert_eq!(jacobi_eigenvalues(&a).unwrap(), vec![0.0, 0.0]);
    }
}
