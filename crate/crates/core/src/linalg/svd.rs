//! Singular values.

use super::Matrix;
use crate::scalar::Real;

/// Singular values of `a`, descending. Returns `min(rows, cols)` values.
pub fn singular_values<T: Real>(a: &Matrix<T>) -> Vec<T> {
    if a.rows() == 0 || a.cols() == 0 {
        return vec![];
    }
    let mut sv: Vec<T> = a.to_na().singular_values().iter().map(|&x| T::from_na(x)).collect();
    sv.sort_by(|p, q| q.partial_cmp(p).expect("finite singular values"));
    sv
}
