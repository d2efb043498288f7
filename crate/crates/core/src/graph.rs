//! Communication topologies and their Laplacian spectra.
//!
//! Edge convention: `weights[(i, j)] > 0` means agent `i` receives
//! information from agent `j`. Information therefore flows `j → i`, and a
//! spanning-tree root is a vertex from which every other vertex can be
//! reached along that flow.

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex;
use serde::Serialize;

use crate::linalg::{eigenvalues, symmetric_eigen, LinalgError, Matrix};
use crate::scalar::Real;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("invalid weight matrix: {0}")]
    InvalidWeights(String),
    #[error("graph size {0} is too small")]
    BadSize(usize),
    #[error("Laplacian has {zero_count} zero eigenvalues; the graph has no spanning tree")]
    NoSpanningTree { zero_count: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Weighted communication graph over `N` agents.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph<T> {
    weights: Matrix<T>,
    directed: bool,
}

impl<T: Real> Graph<T> {
    /// Validates and wraps an adjacency matrix. Undirected graphs must have
    /// exactly symmetric weights.
    pub fn from_weights(weights: Matrix<T>, directed: bool) -> Result<Self, GraphError> {
        let n = weights.rows();
        if n == 0 {
            return Err(GraphError::BadSize(0));
        }
        if !weights.is_square() {
            return Err(GraphError::InvalidWeights(format!(
                "expected a square matrix, got {}x{}",
                weights.rows(),
                weights.cols()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite() || w < T::zero() {
                    return Err(GraphError::InvalidWeights(format!("a[{i}][{j}] = {w} is not a finite nonnegative weight")));
                }
                if i == j && w != T::zero() {
                    return Err(GraphError::InvalidWeights(format!("self-loop weight a[{i}][{i}] = {w}")));
                }
                if !directed && w != weights[(j, i)] {
                    return Err(GraphError::InvalidWeights(format!(
                        "undirected graph needs a[{i}][{j}] == a[{j}][{i}]"
                    )));
                }
            }
        }
        Ok(Self { weights, directed })
    }

    /// All-to-all undirected graph with unit weights.
    pub fn complete(n: usize) -> Result<Self, GraphError> {
        Self::from_weights(Matrix::from_fn(n, n, |i, j| if i == j { T::zero() } else { T::one() }), false)
    }

    /// Undirected path `1 ↔ 2 ↔ … ↔ N` with unit weights.
    pub fn path(n: usize) -> Result<Self, GraphError> {
        Self::from_weights(
            Matrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { T::one() } else { T::zero() }),
            false,
        )
    }

    /// Unweighted directed ring in which agent `i` listens to agent `i + 1 (mod N)`.
    /// Its Laplacian is the circulant with first row `[1, -1, 0, …, 0]`.
    pub fn directed_cycle(n: usize) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::BadSize(n));
        }
        Self::from_weights(Matrix::from_fn(n, n, |i, j| if j == (i + 1) % n { T::one() } else { T::zero() }), true)
    }

    pub fn n_agents(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Matrix<T> {
        &self.weights
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// True when the weights are symmetric, whatever the `directed` flag says.
    pub fn has_symmetric_weights(&self) -> bool {
        self.weights.is_symmetric(T::zero())
    }

    pub fn in_degree(&self, i: usize) -> T {
        self.weights.row(i).iter().copied().sum()
    }

    pub fn out_degree(&self, i: usize) -> T {
        (0..self.n_agents()).map(|j| self.weights[(j, i)]).sum()
    }

    /// `L = D − A` with `D` the in-degree matrix. Rows sum to zero exactly.
    pub fn laplacian(&self) -> Matrix<T> {
        let n = self.n_agents();
        let mut l = self.weights.map(|w| -w);
        for i in 0..n {
            // diagonal recomputed from the negated row so the row sum cancels
            let off: T = (0..n).filter(|&j| j != i).map(|j| l[(i, j)]).sum();
            l[(i, i)] = -off;
        }
        l
    }

    pub fn is_balanced(&self) -> bool {
        let n = self.n_agents();
        let scale = self.weights.max_abs().max(T::one()) * T::lit(n as f64);
        let tol = T::tol(1e-12) * scale;
        (0..n).all(|i| (self.in_degree(i) - self.out_degree(i)).abs() <= tol)
    }

    /// First vertex (lowest index) from which all others are reachable.
    pub fn spanning_tree_root(&self) -> Option<usize> {
        let n = self.n_agents();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::with_capacity(n);
        'roots: for root in 0..n {
            seen.iter_mut().for_each(|s| *s = false);
            seen[root] = true;
            queue.clear();
            queue.push_back(root);
            let mut reached = 1;
            while let Some(j) = queue.pop_front() {
                for i in 0..n {
                    if !seen[i] && self.weights[(i, j)] > T::zero() {
                        seen[i] = true;
                        reached += 1;
                        if reached == n {
                            return Some(root);
                        }
                        queue.push_back(i);
                    }
                }
            }
            if reached == n {
                return Some(root);
            }
            continue 'roots;
        }
        None
    }

    pub fn has_spanning_tree(&self) -> bool {
        self.spanning_tree_root().is_some()
    }

    /// Exactly one unit in-edge and one unit out-edge per vertex, and the
    /// edges close into a single cycle through every vertex.
    pub fn is_unweighted_directed_cycle(&self) -> bool {
        let n = self.n_agents();
        if n < 2 {
            return false;
        }
        let mut next = vec![usize::MAX; n];
        for i in 0..n {
            let mut sources = (0..n).filter(|&j| self.weights[(i, j)] != T::zero());
            match (sources.next(), sources.next()) {
                (Some(j), None) if self.weights[(i, j)] == T::one() => next[i] = j,
                _ => return false,
            }
        }
        let mut out_count = vec![0usize; n];
        for &j in &next {
            out_count[j] += 1;
        }
        if out_count.iter().any(|&c| c != 1) {
            return false;
        }
        let mut v = 0;
        for step in 1..=n {
            v = next[v];
            if v == 0 {
                return step == n;
            }
        }
        false
    }

    /// All Laplacian eigenvalues. Undirected graphs use the symmetric solver;
    /// directed graphs use the general one.
    pub fn spectrum(&self) -> Result<LaplacianSpectrum<T>, GraphError> {
        let l = self.laplacian();
        let values = if self.has_symmetric_weights() {
            symmetric_eigen(&l)?.values.into_iter().map(|v| Complex::new(v, T::zero())).collect()
        } else {
            eigenvalues(&l)?
        };
        LaplacianSpectrum::from_values(values)
    }
}

/// Laplacian eigenvalues sorted by real part, then imaginary part, together
/// with the extreme nonzero eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplacianSpectrum<T> {
    pub eigenvalues: Vec<Complex<T>>,
    /// Smallest nonzero eigenvalue in the sort order (`None` for one agent).
    pub lambda2: Option<Complex<T>>,
    /// Largest eigenvalue in the sort order (`None` for one agent).
    pub lambda_n: Option<Complex<T>>,
}

impl<T: Real> LaplacianSpectrum<T> {
    /// Zero threshold: `|λ| ≤ 1e-9 · max(1, spectral radius)`.
    pub fn zero_tolerance(values: &[Complex<T>]) -> T {
        let radius = values.iter().fold(T::zero(), |m, v| m.max(v.norm()));
        T::tol(1e-9) * radius.max(T::one())
    }

    fn from_values(values: Vec<Complex<T>>) -> Result<Self, GraphError> {
        let tol = Self::zero_tolerance(&values);
        let zero_count = values.iter().filter(|v| v.norm() <= tol).count();
        if zero_count != 1 {
            return Err(GraphError::NoSpanningTree { zero_count });
        }
        let eigenvalues = sort_spectrum(values, tol);
        let nonzero: Vec<_> = eigenvalues.iter().copied().filter(|v| v.norm() > tol).collect();
        Ok(Self { lambda2: nonzero.first().copied(), lambda_n: nonzero.last().copied(), eigenvalues })
    }

    pub fn sum(&self) -> Complex<T> {
        self.eigenvalues.iter().copied().fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
    }

    /// Nonzero eigenvalues as reals, for undirected graphs. `None` if any
    /// eigenvalue has a visible imaginary part.
    pub fn real_nonzero(&self) -> Option<Vec<T>> {
        let tol = Self::zero_tolerance(&self.eigenvalues);
        let mut out = Vec::new();
        for v in &self.eigenvalues {
            if v.im.abs() > tol {
                return None;
            }
            if v.norm() > tol {
                out.push(v.re);
            }
        }
        Some(out)
    }
}

/// Sorts by real part; entries whose real parts agree within `tol` are
/// ordered by imaginary part.
fn sort_spectrum<T: Real>(mut values: Vec<Complex<T>>, tol: T) -> Vec<Complex<T>> {
    values.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap_or(std::cmp::Ordering::Equal));
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && (values[end].re - values[start].re).abs() <= tol {
            end += 1;
        }
        values[start..end].sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal));
        start = end;
    }
    values
}

/// Real and imaginary parts of the `i`-th (1-based) eigenvalue of the
/// unweighted directed `N`-cycle Laplacian:
/// `λ_i = (1 − cos θ) − j sin θ`, `θ = 2π(i − 1)/N`.
pub fn cycle_eigenvalue<T: Real>(n: usize, i: usize) -> Complex<T> {
    let theta = 2.0 * PI * (i as f64 - 1.0) / n as f64;
    Complex::new(T::lit(1.0 - theta.cos()), T::lit(-theta.sin()))
}

/// Closed-form spectrum of the unweighted directed `N`-cycle.
pub fn cycle_spectrum<T: Real>(n: usize) -> Result<LaplacianSpectrum<T>, GraphError> {
    if n < 2 {
        return Err(GraphError::BadSize(n));
    }
    let values = (1..=n).map(|i| cycle_eigenvalue(n, i)).collect();
    LaplacianSpectrum::from_values(values)
}
