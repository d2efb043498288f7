//! Matrix inequalities for consensus gain synthesis.
//!
//! Every problem is a list of symmetric blocks `F_b(v) = C_b + Σ_k v_k F_{b,k}`
//! that must be negative semidefinite, together with `X ≻ 0` and `Z ≻ 0`.
//! The decision vector `v` stacks the upper triangle of `X` (row-major), then
//! `Y` (row-major), then the diagonal of `Z`.

use serde::{Deserialize, Serialize};

use crate::dynamics::AgentDynamics;
use crate::graph::cycle_eigenvalue;
use crate::linalg::{jacobi_eigenvalues, LinalgError, Matrix};
use crate::scalar::Real;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LmiError {
    #[error("bad eigenvalues: need 0 < lambda2 <= lambdaN, got {lambda2} and {lambda_n}")]
    BadEigenvalues { lambda2: f64, lambda_n: f64 },
    #[error("cycle size {0} is too small")]
    BadSize(usize),
    #[error("bad sector: {0}")]
    BadSector(String),
    #[error("eps must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Per-channel sector `[δ_{k,1}, δ_{k,2}]`: `(u − δ₁z)(u − δ₂z) ≤ 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorBounds<T> {
    delta1: Vec<T>,
    delta2: Vec<T>,
}

impl<T: Real> SectorBounds<T> {
    pub fn new(delta1: Vec<T>, delta2: Vec<T>) -> Result<Self, LmiError> {
        if delta1.len() != delta2.len() || delta1.is_empty() {
            return Err(LmiError::BadSector(format!(
                "need equally many lower and upper bounds, got {} and {}",
                delta1.len(),
                delta2.len()
            )));
        }
        for (k, (&lo, &hi)) in delta1.iter().zip(&delta2).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || !(lo < hi) {
                return Err(LmiError::BadSector(format!("channel {k}: need finite delta1 < delta2, got [{lo}, {hi}]")));
            }
        }
        Ok(Self { delta1, delta2 })
    }

    /// Same interval on every channel.
    pub fn uniform(m: usize, lo: T, hi: T) -> Result<Self, LmiError> {
        Self::new(vec![lo; m], vec![hi; m])
    }

    /// The saturation sector `[0, 1]` on `m` channels.
    pub fn saturation(m: usize) -> Self {
        Self::uniform(m, T::zero(), T::one()).expect("[0, 1] is a valid sector")
    }

    pub fn m(&self) -> usize {
        self.delta1.len()
    }

    pub fn delta1(&self) -> &[T] {
        &self.delta1
    }

    pub fn delta2(&self) -> &[T] {
        &self.delta2
    }

    /// `(u − δ_{k,1} z)(u − δ_{k,2} z)`; nonpositive inside the sector.
    pub fn sector_product(&self, channel: usize, z: T, u: T) -> T {
        (u - self.delta1[channel] * z) * (u - self.delta2[channel] * z)
    }

    fn diag_sum(&self) -> Vec<T> {
        self.delta1.iter().zip(&self.delta2).map(|(&a, &b)| a + b).collect()
    }

    fn diag_diff(&self) -> Vec<T> {
        self.delta1.iter().zip(&self.delta2).map(|(&a, &b)| a - b).collect()
    }
}

/// A candidate `(X, Y, Z)` with `Z` stored as its diagonal.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real + Serialize"))]
pub struct Decision<T> {
    pub x: Matrix<T>,
    pub y: Matrix<T>,
    pub z: Vec<T>,
}

impl<T: Real> Decision<T> {
    pub fn new(x: Matrix<T>, y: Matrix<T>, z: Vec<T>) -> Result<Self, LmiError> {
        let n = x.rows();
        if !x.is_square() || y.cols() != n || y.rows() != z.len() {
            return Err(LmiError::DimensionMismatch(format!(
                "X {}x{}, Y {}x{}, Z {} entries",
                x.rows(),
                x.cols(),
                y.rows(),
                y.cols(),
                z.len()
            )));
        }
        Ok(Self { x, y, z })
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self { x: Matrix::zeros(n, n), y: Matrix::zeros(m, n), z: vec![T::zero(); m] }
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn m(&self) -> usize {
        self.z.len()
    }

    pub fn z_matrix(&self) -> Matrix<T> {
        Matrix::diag(&self.z)
    }

    /// `n(n+1)/2 + mn + m`.
    pub fn dim(n: usize, m: usize) -> usize {
        n * (n + 1) / 2 + m * n + m
    }

    /// Reads `X` from its upper triangle; the lower triangle is ignored.
    pub fn to_flat(&self) -> Vec<T> {
        let n = self.n();
        let mut v = Vec::with_capacity(Self::dim(n, self.m()));
        for i in 0..n {
            for j in i..n {
                v.push(self.x[(i, j)]);
            }
        }
        v.extend_from_slice(self.y.as_slice());
        v.extend_from_slice(&self.z);
        v
    }

    pub fn from_flat(n: usize, m: usize, v: &[T]) -> Result<Self, LmiError> {
        if v.len() != Self::dim(n, m) {
            return Err(LmiError::DimensionMismatch(format!("expected {} decision entries, got {}", Self::dim(n, m), v.len())));
        }
        let mut x = Matrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                x[(i, j)] = v[k];
                x[(j, i)] = v[k];
                k += 1;
            }
        }
        let y = Matrix::from_vec(m, n, v[k..k + m * n].to_vec());
        let z = v[k + m * n..].to_vec();
        Ok(Self { x, y, z })
    }

    /// `α·self + β·other`.
    pub fn combine(&self, alpha: T, other: &Self, beta: T) -> Self {
        let mut x = self.x.scale(alpha);
        x.axpy(beta, &other.x);
        let mut y = self.y.scale(alpha);
        y.axpy(beta, &other.y);
        let z = self.z.iter().zip(&other.z).map(|(&a, &b)| alpha * a + beta * b).collect();
        Self { x, y, z }
    }
}

/// Which directed-cycle constants to use. `Literal` takes the block constants
/// as written and symmetrizes the result; `Derived` uses constants that reproduce the complex
/// Hermitian inequality through a Schur complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CycleVariant {
    Literal,
    Derived,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LmiKind<T> {
    Undirected { lambda2: T, lambda_n: T },
    DirectedCycle { n_agents: usize, variant: CycleVariant },
    Custom { description: String },
}

/// One affine block `C + Σ v_k F_k ⪯ 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real + Serialize"))]
pub struct LmiBlock<T> {
    pub label: String,
    pub constant: Matrix<T>,
    pub coefficients: Vec<Matrix<T>>,
}

impl<T: Real> LmiBlock<T> {
    /// Samples an affine map at zero and at every basis decision.
    pub fn from_affine_map(label: impl Into<String>, n: usize, m: usize, f: impl Fn(&Decision<T>) -> Matrix<T>) -> Self {
        let p = Decision::<T>::dim(n, m);
        let constant = f(&Decision::zeros(n, m));
        let mut e = vec![T::zero(); p];
        let coefficients = (0..p)
            .map(|k| {
                e[k] = T::one();
                let basis = Decision::from_flat(n, m, &e).expect("basis has the right length");
                e[k] = T::zero();
                &f(&basis) - &constant
            })
            .collect();
        Self { label: label.into(), constant, coefficients }
    }

    pub fn size(&self) -> usize {
        self.constant.rows()
    }

    pub fn evaluate_flat(&self, v: &[T]) -> Matrix<T> {
        let mut out = self.constant.clone();
        for (c, &vk) in self.coefficients.iter().zip(v) {
            if vk != T::zero() {
                out.axpy(vk, c);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real + Serialize"))]
pub struct LmiProblem<T> {
    pub n: usize,
    pub m: usize,
    pub eps: T,
    pub kind: LmiKind<T>,
    pub blocks: Vec<LmiBlock<T>>,
}

impl<T: Real> LmiProblem<T> {
    pub fn n_vars(&self) -> usize {
        Decision::<T>::dim(self.n, self.m)
    }

    pub fn evaluate(&self, v: &Decision<T>) -> Result<Vec<Matrix<T>>, LmiError> {
        self.check_dims(v)?;
        let flat = v.to_flat();
        Ok(self.blocks.iter().map(|b| b.evaluate_flat(&flat)).collect())
    }

    fn check_dims(&self, v: &Decision<T>) -> Result<(), LmiError> {
        if v.n() != self.n || v.m() != self.m || v.y.shape() != (self.m, self.n) || !v.x.is_square() {
            return Err(LmiError::DimensionMismatch(format!(
                "problem has n={}, m={}; candidate has X {}x{}, Y {}x{}, {} Z entries",
                self.n,
                self.m,
                v.x.rows(),
                v.x.cols(),
                v.y.rows(),
                v.y.cols(),
                v.z.len()
            )));
        }
        Ok(())
    }

    /// Single block `sym(AX) + εX ⪯ 0` with no `Y` or `Z`.
    pub fn lyapunov(a: &Matrix<T>, eps: T) -> Self {
        let n = a.rows();
        let block = LmiBlock::from_affine_map("lyapunov", n, 0, |v| {
            let mut out = (a * &v.x).sym();
            out.axpy(eps, &v.x);
            out
        });
        Self { n, m: 0, eps, kind: LmiKind::Custom { description: "sym(AX) + eps X <= 0".into() }, blocks: vec![block] }
    }
}

/// Residuals of a candidate. Every entry is `≤ 0` exactly when the candidate
/// satisfies the corresponding constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residuals<T> {
    /// Largest eigenvalue of each block.
    pub blocks: Vec<T>,
    /// `−λ_min(X)`.
    pub x_strictness: T,
    /// `−min_k Z_kk` (`−∞` when `m = 0`).
    pub z_strictness: T,
}

impl<T: Real> Residuals<T> {
    pub fn to_vec(&self) -> Vec<T> {
        let mut v = self.blocks.clone();
        v.push(self.x_strictness);
        if self.z_strictness.is_finite() {
            v.push(self.z_strictness);
        }
        v
    }

    pub fn max(&self) -> T {
        self.to_vec().into_iter().fold(T::neg_infinity(), T::max)
    }

    /// Index of the block with the largest residual.
    pub fn worst_block(&self) -> Option<usize> {
        (0..self.blocks.len()).max_by(|&a, &b| self.blocks[a].partial_cmp(&self.blocks[b]).unwrap_or(std::cmp::Ordering::Equal))
    }
}

/// Evaluates every constraint with the Jacobi eigenvalue routine.
pub fn residual<T: Real>(p: &LmiProblem<T>, v: &Decision<T>) -> Result<Residuals<T>, LmiError> {
    let blocks = p
        .evaluate(v)?
        .iter()
        .map(|b| Ok(jacobi_eigenvalues(b)?.last().copied().unwrap_or(T::neg_infinity())))
        .collect::<Result<Vec<_>, LmiError>>()?;
    let x_min = jacobi_eigenvalues(&v.x)?.first().copied().unwrap_or(T::infinity());
    let z_min = v.z.iter().copied().fold(T::infinity(), T::min);
    Ok(Residuals { blocks, x_strictness: -x_min, z_strictness: -z_min })
}

fn check_inputs<T: Real>(d: &AgentDynamics<T>, s: &SectorBounds<T>, eps: T) -> Result<(), LmiError> {
    if s.m() != d.m() {
        return Err(LmiError::DimensionMismatch(format!("sector has {} channels, B has {} columns", s.m(), d.m())));
    }
    if !(eps > T::zero()) || !eps.is_finite() {
        return Err(LmiError::BadEpsilon(eps.as_f64()));
    }
    Ok(())
}

/// `[[sym(AX + λBΔ₂Y) + εX, BZ + ½λYᵀ(Δ₁ − Δ₂)], [·ᵀ, −Z]]`.
pub fn undirected_block<T: Real>(d: &AgentDynamics<T>, s: &SectorBounds<T>, lambda: T, eps: T, v: &Decision<T>) -> Matrix<T> {
    let (a, b) = (d.a(), d.b());
    let d2 = Matrix::diag(s.delta2());
    let diff = Matrix::diag(&s.diag_diff());
    let zm = v.z_matrix();
    let mut ul = &(a * &v.x) + &(&(b * &d2) * &v.y).scale(lambda);
    ul = ul.sym();
    ul.axpy(eps, &v.x);
    let ur = &(b * &zm) + &(&v.y.transpose() * &diff).scale(lambda * T::half());
    Matrix::block2(&ul, &ur, &ur.transpose(), &zm.scale(-T::one()))
}

/// Constants of the `i`-th directed-cycle block: `(Δ̂ᵢ, Δ̃ᵢ)` as diagonals.
fn cycle_constants<T: Real>(s: &SectorBounds<T>, n_agents: usize, i: usize, variant: CycleVariant) -> (Vec<T>, Vec<T>) {
    let lambda = cycle_eigenvalue::<T>(n_agents, i);
    // 2(1 − cos θ) = |λ|² for the cycle
    let modulus = (T::two() * lambda.re).sqrt();
    let (hat_scale, tilde_hat_weight) = match variant {
        CycleVariant::Literal => (modulus, T::one()),
        CycleVariant::Derived => (modulus * T::half(), T::two()),
    };
    let hat: Vec<T> = s.diag_diff().into_iter().map(|x| hat_scale * x).collect();
    let tilde = s.diag_sum().into_iter().zip(&hat).map(|(sum, &h)| lambda.re * sum - tilde_hat_weight * h).collect();
    (hat, tilde)
}

/// The `i`-th directed-cycle block (`2 ≤ i ≤ N`), laid out as
/// `[[U, R, −𝕐, 0], [Rᵀ, −Z, 0, 0], [𝕐, 0, U, R], [0, 0, Rᵀ, −Z]]` with
/// `U = sym(AX + ½BΔ̃ᵢY) + εX` and `R = BZ + YᵀΔ̂ᵢ`.
///
/// The literal `𝕐ᵢ` is symmetric, which makes the printed layout
/// nonsymmetric; the returned matrix is its symmetric part, where `𝕐ᵢ`
/// cancels. The derived `𝕐ᵢ = ½λ_{i,ℓ}(S − Sᵀ)`, `S = B(Δ₁ + Δ₂)Y`, is skew
/// and the layout is already symmetric.
pub fn cycle_block<T: Real>(
    d: &AgentDynamics<T>,
    s: &SectorBounds<T>,
    n_agents: usize,
    i: usize,
    eps: T,
    variant: CycleVariant,
    v: &Decision<T>,
) -> Matrix<T> {
    let (n, m) = (d.n(), d.m());
    let (a, b) = (d.a(), d.b());
    let (hat, tilde) = cycle_constants(s, n_agents, i, variant);
    let zm = v.z_matrix();
    let mut ul = (&(a * &v.x) + &(&(b * &Matrix::diag(&tilde)) * &v.y).scale(T::half())).sym();
    ul.axpy(eps, &v.x);
    let ur = &(b * &zm) + &(&v.y.transpose() * &Matrix::diag(&hat));
    let base = Matrix::block2(&ul, &ur, &ur.transpose(), &zm.scale(-T::one()));

    let s_mat = &(b * &Matrix::diag(&s.diag_sum())) * &v.y;
    let lambda = cycle_eigenvalue::<T>(n_agents, i);
    let coupling = match variant {
        // −½ sin θ = ½ λ_{i,ℓ}
        CycleVariant::Literal => s_mat.sym().scale(lambda.im * T::half()),
        CycleVariant::Derived => s_mat.skew().scale(lambda.im * T::half()),
    };
    let k = n + m;
    let mut out = Matrix::zeros(2 * k, 2 * k);
    out.set_block(0, 0, &base);
    out.set_block(k, k, &base);
    out.set_block(0, k, &coupling.scale(-T::one()));
    out.set_block(k, 0, &coupling);
    match variant {
        CycleVariant::Literal => out.symmetric_part(),
        CycleVariant::Derived => out,
    }
}

/// Two blocks, at `λ₂` and at `λ_N`.
pub fn assemble_undirected<T: Real>(
    d: &AgentDynamics<T>,
    s: &SectorBounds<T>,
    lambda2: T,
    lambda_n: T,
    eps: T,
) -> Result<LmiProblem<T>, LmiError> {
    check_inputs(d, s, eps)?;
    if !(lambda2 > T::zero()) || !(lambda2 <= lambda_n) || !lambda_n.is_finite() {
        return Err(LmiError::BadEigenvalues { lambda2: lambda2.as_f64(), lambda_n: lambda_n.as_f64() });
    }
    let (n, m) = (d.n(), d.m());
    let blocks = [("lambda2", lambda2), ("lambdaN", lambda_n)]
        .into_iter()
        .map(|(name, lambda)| {
            LmiBlock::from_affine_map(format!("{name}={lambda}"), n, m, |v| undirected_block(d, s, lambda, eps, v))
        })
        .collect();
    Ok(LmiProblem { n, m, eps, kind: LmiKind::Undirected { lambda2, lambda_n }, blocks })
}

/// `N − 1` blocks of size `2(n + m)`, one for each `i = 2..N`.
pub fn assemble_directed_cycle<T: Real>(
    d: &AgentDynamics<T>,
    s: &SectorBounds<T>,
    n_agents: usize,
    eps: T,
    variant: CycleVariant,
) -> Result<LmiProblem<T>, LmiError> {
    check_inputs(d, s, eps)?;
    if n_agents < 2 {
        return Err(LmiError::BadSize(n_agents));
    }
    let (n, m) = (d.n(), d.m());
    let blocks = (2..=n_agents)
        .map(|i| LmiBlock::from_affine_map(format!("i={i}"), n, m, |v| cycle_block(d, s, n_agents, i, eps, variant, v)))
        .collect();
    Ok(LmiProblem { n, m, eps, kind: LmiKind::DirectedCycle { n_agents, variant }, blocks })
}

/// The Schur-complemented quadratic form at eigenvalue `λ`:
/// `AX + XAᵀ + εX + BZBᵀ + ½λ·sym(B(Δ₁+Δ₂)Y) + ¼λ²·YᵀZ⁻¹(Δ₁−Δ₂)²Y`.
/// It is `⪯ 0` exactly when [`undirected_block`] at `λ` is, given `Z ≻ 0`.
pub fn riccati_form<T: Real>(
    d: &AgentDynamics<T>,
    s: &SectorBounds<T>,
    lambda: T,
    eps: T,
    v: &Decision<T>,
) -> Result<Matrix<T>, LmiError> {
    if v.z.iter().any(|&z| !(z > T::zero())) {
        return Err(LmiError::Linalg(LinalgError::NotPositiveDefinite));
    }
    let (a, b) = (d.a(), d.b());
    let quad: Vec<T> = s.diag_diff().iter().zip(&v.z).map(|(&g, &z)| g * g / z).collect();
    let mut out = (a * &v.x).sym();
    out.axpy(eps, &v.x);
    out = &out + &(&(b * &v.z_matrix()) * &b.transpose());
    out.axpy(lambda * T::half(), &(&(b * &Matrix::diag(&s.diag_sum())) * &v.y).sym());
    out.axpy(lambda * lambda / T::lit(4.0), &(&(&v.y.transpose() * &Matrix::diag(&quad)) * &v.y));
    Ok(out)
}

/// Largest eigenvalue of [`riccati_form`].
pub fn riccati_residual<T: Real>(
    d: &AgentDynamics<T>,
    s: &SectorBounds<T>,
    lambda: T,
    eps: T,
    v: &Decision<T>,
) -> Result<T, LmiError> {
    let r = riccati_form(d, s, lambda, eps, v)?;
    Ok(jacobi_eigenvalues(&r)?.last().copied().unwrap_or(T::neg_infinity()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::realize_room_model;

    fn room() -> AgentDynamics<f64> {
        realize_room_model(10.0, 50.0).unwrap()
    }

    fn sample(seed: u64) -> Decision<f64> {
        // small deterministic pseudo-random decision
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let v: Vec<f64> = (0..Decision::<f64>::dim(2, 1)).map(|_| next()).collect();
        Decision::from_flat(2, 1, &v).unwrap()
    }

    #[test]
    fn sector_validation() {
        assert!(SectorBounds::new(vec![0.0], vec![1.0]).is_ok());
        assert!(SectorBounds::new(vec![1.0], vec![1.0]).is_err());
        assert!(SectorBounds::new(vec![0.0, 0.0], vec![1.0]).is_err());
        let s = SectorBounds::uniform(1, 0.7, 1.2).unwrap();
        assert!(s.sector_product(0, 2.0, 1.8) < 0.0);
    }

    #[test]
    fn flat_round_trip() {
        let v = sample(3);
        assert_eq!(Decision::from_flat(2, 1, &v.to_flat()).unwrap(), v);
        assert!(v.x.is_symmetric(0.0));
        assert!(Decision::<f64>::from_flat(2, 1, &[0.0; 5]).is_err());
    }

    #[test]
    fn all_to_all_blocks_are_identical() {
        let p = assemble_undirected(&room(), &SectorBounds::saturation(1), 3.0, 3.0, 0.1).unwrap();
        assert_eq!(p.blocks.len(), 2);
        assert_eq!(p.blocks[0].size(), 3);
        assert_eq!(p.blocks[0].constant, p.blocks[1].constant);
        assert_eq!(p.blocks[0].coefficients, p.blocks[1].coefficients);
    }

    #[test]
    fn zero_dynamics_block() {
        let d = AgentDynamics::new(Matrix::zeros(2, 2), Matrix::zeros(2, 1)).unwrap();
        let v = Decision::new(Matrix::identity(2), Matrix::zeros(1, 2), vec![1.0]).unwrap();
        let blk = undirected_block(&d, &SectorBounds::saturation(1), 1.0, 0.0, &v);
        let mut want = Matrix::zeros(3, 3);
        want[(2, 2)] = -1.0;
        assert_eq!(blk, want);
    }

    #[test]
    fn identity_dynamics_residual_is_two() {
        let d = AgentDynamics::<f64>::new(Matrix::identity(2), Matrix::zeros(2, 1)).unwrap();
        let p = assemble_undirected(&d, &SectorBounds::saturation(1), 1.0, 2.0, 1e-300).unwrap();
        let v = Decision::new(Matrix::identity(2), Matrix::zeros(1, 2), vec![1.0]).unwrap();
        let r = residual(&p, &v).unwrap();
        assert!((r.blocks[0] - 2.0).abs() < 1e-12);
        assert_eq!(r.x_strictness, -1.0);
        assert_eq!(r.z_strictness, -1.0);
    }

    #[test]
    fn blocks_are_affine_and_symmetric() {
        let d = room();
        let s = SectorBounds::uniform(1, 0.7, 1.2).unwrap();
        let problems = [
            assemble_undirected(&d, &s, 1.0, 3.0, 0.1).unwrap(),
            assemble_directed_cycle(&d, &s, 5, 0.1, CycleVariant::Literal).unwrap(),
            assemble_directed_cycle(&d, &s, 5, 0.1, CycleVariant::Derived).unwrap(),
        ];
        for p in &problems {
            for seed in 0..5 {
                let (v1, v2) = (sample(seed), sample(seed + 100));
                let mid = v1.combine(0.5, &v2, 0.5);
                let (e1, e2, em) = (p.evaluate(&v1).unwrap(), p.evaluate(&v2).unwrap(), p.evaluate(&mid).unwrap());
                for b in 0..p.blocks.len() {
                    let avg = (&e1[b] + &e2[b]).scale(0.5);
                    assert!((&em[b] - &avg).max_abs() <= 1e-12);
                    assert!(em[b].is_symmetric(0.0));
                }
            }
        }
    }

    #[test]
    fn coefficient_form_matches_direct_formula() {
        let d = room();
        let s = SectorBounds::uniform(1, 0.7, 1.2).unwrap();
        let p = assemble_directed_cycle(&d, &s, 4, 0.2, CycleVariant::Derived).unwrap();
        let v = sample(9);
        let e = p.evaluate(&v).unwrap();
        for (b, i) in (2..=4).enumerate() {
            let direct = cycle_block(&d, &s, 4, i, 0.2, CycleVariant::Derived, &v);
            assert!((&e[b] - &direct).max_abs() <= 1e-13);
        }
    }

    #[test]
    fn cycle_block_count_and_size() {
        let p = assemble_directed_cycle(&room(), &SectorBounds::saturation(1), 3, 0.1, CycleVariant::Literal).unwrap();
        assert_eq!(p.blocks.len(), 2);
        assert!(p.blocks.iter().all(|b| b.size() == 6));
        assert_eq!(
            assemble_directed_cycle(&room(), &SectorBounds::saturation(1), 1, 0.1, CycleVariant::Literal).unwrap_err(),
            LmiError::BadSize(1)
        );
    }

    #[test]
    fn two_cycle_is_block_diagonal_copy_of_undirected() {
        let d = room();
        let s = SectorBounds::uniform(1, 0.7, 1.2).unwrap();
        let v = sample(4);
        let blk = cycle_block(&d, &s, 2, 2, 0.1, CycleVariant::Derived, &v);
        let und = undirected_block(&d, &s, 2.0, 0.1, &v);
        assert!((&blk.block(0, 0, 3, 3) - &und).max_abs() <= 1e-13);
        assert!((&blk.block(3, 3, 3, 3) - &und).max_abs() <= 1e-13);
        assert!(blk.block(0, 3, 3, 3).max_abs() <= 1e-15);
    }

    #[test]
    fn literal_coupling_cancels_under_symmetrization() {
        let d = room();
        let s = SectorBounds::saturation(1);
        let blk = cycle_block(&d, &s, 3, 2, 0.1, CycleVariant::Literal, &sample(1));
        assert_eq!(blk.block(0, 3, 2, 2).max_abs(), 0.0);
    }

    #[test]
    fn riccati_form_agrees_with_block_sign() {
        let d = room();
        let s = SectorBounds::uniform(1, 0.7, 1.2).unwrap();
        // X = I, tiny Y, moderate Z: block and its Schur complement share sign
        for &(y, z) in &[(-0.5, 1.0), (0.3, 0.01), (-2.0, 0.2)] {
            let v = Decision::new(Matrix::identity(2), Matrix::from_rows(&[[y, 2.0 * y]]), vec![z]).unwrap();
            for &lambda in &[1.0, 2.0, 3.0] {
                let blk = jacobi_eigenvalues(&undirected_block(&d, &s, lambda, 0.1, &v)).unwrap();
                let ric = riccati_residual(&d, &s, lambda, 0.1, &v).unwrap();
                assert_eq!(blk.last().unwrap() <= &0.0, ric <= 0.0);
            }
        }
    }

    #[test]
    fn coupling_term_vanishes_with_sector_width() {
        let d = room();
        let v = sample(2);
        for &c in &[1e-2, 1e-5, 1e-8] {
            let s = SectorBounds::uniform(1, 1.0 - c, 1.0).unwrap();
            let with = undirected_block(&d, &s, 2.0, 0.1, &v);
            let mut v0 = v.clone();
            v0.y = Matrix::zeros(1, 2);
            let ur_y = &with.block(0, 2, 2, 1) - &undirected_block(&d, &s, 2.0, 0.1, &v0).block(0, 2, 2, 1);
            assert!(ur_y.max_abs() <= c * v.y.max_abs() + 1e-15);
        }
    }
}
