//! Closed-loop simulation of the Lur'e network
//! `ẋ = (I_N ⊗ A) x + (I_N ⊗ B) f((ℒ ⊗ K) x)` and checks on its trajectories.

mod montecarlo;
mod nonlinearity;
mod trace;

use serde::Serialize;

pub use montecarlo::{draw_gains, monte_carlo, MonteCarloRun, MonteCarloSpec, RunSummary};
pub use nonlinearity::{evaluate_nonlinearity, ChannelMap, Nonlinearity, NonlinearityKind, SECTOR_TOL};
pub use trace::SimulationTrace;

use crate::dynamics::AgentDynamics;
use crate::graph::Graph;
use crate::linalg::{singular_values, Cholesky, Matrix};
use crate::scalar::Real;

/// Relative blow-up threshold: `‖x‖ > DIVERGENCE · (1 + ‖x0‖)`.
pub const DIVERGENCE: f64 = 1e9;
/// Default consensus threshold relative to the initial disagreement.
pub const DEFAULT_REL_TOL: f64 = 1e-3;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SimError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("bad nonlinearity: {0}")]
    BadNonlinearity(String),
    #[error("bad time grid: {0}")]
    BadTimeGrid(String),
    #[error("sector violated at agent {agent}, channel {channel}: z = {z}, u = {u}, product = {product:e}")]
    SectorViolation { agent: usize, channel: usize, z: f64, u: f64, product: f64 },
    #[error("state diverged at t = {time}")]
    Divergence { time: f64 },
    #[error("Lyapunov matrix is ill conditioned (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },
}

/// Precomputed right-hand side of the network.
struct Network<'a, T> {
    a: &'a Matrix<T>,
    b: &'a Matrix<T>,
    k: &'a Matrix<T>,
    laplacian: Matrix<T>,
    f: &'a Nonlinearity<T>,
    n: usize,
    m: usize,
    n_agents: usize,
}

impl<T: Real> Network<'_, T> {
    /// Fills `z`, `u` and `dx` at state `x`.
    fn eval(&self, x: &[T], kx: &mut [T], z: &mut [T], u: &mut [T], dx: &mut [T]) -> Result<(), SimError> {
        let (n, m, na) = (self.n, self.m, self.n_agents);
        for j in 0..na {
            let xj = &x[j * n..(j + 1) * n];
            for c in 0..m {
                kx[j * m + c] = self.k.row(c).iter().zip(xj).map(|(&a, &b)| a * b).sum();
            }
        }
        for i in 0..na {
            for c in 0..m {
                z[i * m + c] = (0..na)
                    .filter(|&j| self.laplacian[(i, j)] != T::zero())
                    .map(|j| self.laplacian[(i, j)] * kx[j * m + c])
                    .sum();
            }
        }
        self.f.evaluate_into(z, u)?;
        for i in 0..na {
            let xi = &x[i * n..(i + 1) * n];
            let ui = &u[i * m..(i + 1) * m];
            for r in 0..n {
                let ax: T = self.a.row(r).iter().zip(xi).map(|(&a, &b)| a * b).sum();
                let bu: T = self.b.row(r).iter().zip(ui).map(|(&a, &b)| a * b).sum();
                dx[i * n + r] = ax + bu;
            }
        }
        Ok(())
    }
}

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Classical fourth-order Runge–Kutta with fixed step `dt` on `[0, horizon]`,
/// evaluating `f` inside every stage.
pub fn simulate<T: Real>(
    d: &AgentDynamics<T>,
    g: &Graph<T>,
    k: &Matrix<T>,
    f: &Nonlinearity<T>,
    x0: &[T],
    dt: T,
    horizon: T,
) -> Result<SimulationTrace<T>, SimError> {
    let (n, m, na) = (d.n(), d.m(), g.n_agents());
    if k.shape() != (m, n) {
        return Err(SimError::DimensionMismatch(format!("K is {}x{}, expected {m}x{n}", k.rows(), k.cols())));
    }
    if f.m() != m {
        return Err(SimError::DimensionMismatch(format!("nonlinearity has {} channels, B has {m} columns", f.m())));
    }
    if x0.len() != n * na {
        return Err(SimError::DimensionMismatch(format!("x0 has {} entries, expected {}", x0.len(), n * na)));
    }
    if !(dt > T::zero()) || !(horizon >= dt) || !horizon.is_finite() {
        return Err(SimError::BadTimeGrid(format!("need 0 < dt <= horizon, got dt = {dt}, horizon = {horizon}")));
    }
    let steps = (horizon / dt - T::lit(1e-9)).ceil().to_usize().unwrap_or(0);
    let net = Network { a: d.a(), b: d.b(), k, laplacian: g.laplacian(), f, n, m, n_agents: na };

    let (nx, nz) = (n * na, m * na);
    let mut trace = SimulationTrace {
        n,
        m,
        n_agents: na,
        dt,
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        z_signals: Vec::with_capacity(steps + 1),
        inputs: Vec::with_capacity(steps + 1),
        disagreement: Vec::with_capacity(steps + 1),
        lyapunov: None,
    };
    let limit = T::lit(DIVERGENCE) * (T::one() + norm(x0));
    let mut x = x0.to_vec();
    let (mut kx, mut z, mut u) = (vec![T::zero(); nz], vec![T::zero(); nz], vec![T::zero(); nz]);
    let (mut s_z, mut s_u) = (vec![T::zero(); nz], vec![T::zero(); nz]);
    let mut k1 = vec![T::zero(); nx];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    let half = T::half();
    let sixth = T::one() / T::lit(6.0);

    for j in 0..=steps {
        let t = T::lit(j as f64) * dt;
        net.eval(&x, &mut kx, &mut z, &mut u, &mut k1)?;
        trace.times.push(t);
        trace.states.push(x.clone());
        trace.z_signals.push(z.clone());
        trace.inputs.push(u.clone());
        trace.disagreement.push(disagreement(&x, na));
        if j == steps {
            break;
        }
        for i in 0..nx {
            tmp[i] = x[i] + half * dt * k1[i];
        }
        net.eval(&tmp, &mut kx, &mut s_z, &mut s_u, &mut k2)?;
        for i in 0..nx {
            tmp[i] = x[i] + half * dt * k2[i];
        }
        net.eval(&tmp, &mut kx, &mut s_z, &mut s_u, &mut k3)?;
        for i in 0..nx {
            tmp[i] = x[i] + dt * k3[i];
        }
        net.eval(&tmp, &mut kx, &mut s_z, &mut s_u, &mut k4)?;
        for i in 0..nx {
            x[i] += dt * sixth * (k1[i] + T::two() * (k2[i] + k3[i]) + k4[i]);
        }
        let size = norm(&x);
        if !(size <= limit) {
            return Err(SimError::Divergence { time: (t + dt).as_f64() });
        }
    }
    Ok(trace)
}

/// `‖(P₁ ⊗ I_n) x‖₂` with `P₁ = I − 𝟙𝟙ᵀ/N`: distance from the consensus subspace.
pub fn disagreement<T: Real>(x: &[T], n_agents: usize) -> T {
    let n = x.len() / n_agents.max(1);
    let mut acc = T::zero();
    for s in 0..n {
        let mean = (0..n_agents).map(|i| x[i * n + s]).sum::<T>() / T::lit(n_agents as f64);
        acc += (0..n_agents).map(|i| (x[i * n + s] - mean).powi(2)).sum::<T>();
    }
    acc.sqrt()
}

/// Checked form of [`disagreement`].
pub fn try_disagreement<T: Real>(x: &[T], n_agents: usize) -> Result<T, SimError> {
    if n_agents == 0 || x.len() % n_agents != 0 {
        return Err(SimError::DimensionMismatch(format!("{} entries do not split over {n_agents} agents", x.len())));
    }
    Ok(disagreement(x, n_agents))
}

/// `V(x) = xᵀ (P₁ ⊗ X⁻¹) x`.
#[derive(Debug, Clone)]
pub struct LyapunovFunction<T: Real> {
    chol: Cholesky<T>,
}

impl<T: Real> LyapunovFunction<T> {
    pub fn new(x: &Matrix<T>) -> Result<Self, SimError> {
        let sv = singular_values(x);
        let (max, min) = (sv.first().copied().unwrap_or(T::zero()), sv.last().copied().unwrap_or(T::zero()));
        let condition = if min > T::zero() { (max / min).as_f64() } else { f64::INFINITY };
        if !(condition <= crate::synthesis::MAX_CONDITION) {
            return Err(SimError::IllConditioned { condition });
        }
        let chol = Cholesky::new(x).map_err(|_| SimError::IllConditioned { condition })?;
        Ok(Self { chol })
    }

    pub fn value(&self, x: &[T], n_agents: usize) -> T {
        let n = self.chol.factor().rows();
        let mut mean = vec![T::zero(); n];
        for i in 0..n_agents {
            for s in 0..n {
                mean[s] += x[i * n + s];
            }
        }
        mean.iter_mut().for_each(|v| *v /= T::lit(n_agents as f64));
        let mut acc = T::zero();
        let mut e = vec![T::zero(); n];
        for i in 0..n_agents {
            for s in 0..n {
                e[s] = x[i * n + s] - mean[s];
            }
            let w = self.chol.solve_vec(&e);
            acc += e.iter().zip(&w).map(|(&a, &b)| a * b).sum::<T>();
        }
        acc.max(T::zero())
    }
}

pub fn lyapunov_value<T: Real>(x: &[T], n_agents: usize, lyap_x: &Matrix<T>) -> Result<T, SimError> {
    if n_agents == 0 || x.len() != n_agents * lyap_x.rows() {
        return Err(SimError::DimensionMismatch(format!("{} entries for {n_agents} agents of size {}", x.len(), lyap_x.rows())));
    }
    Ok(LyapunovFunction::new(lyap_x)?.value(x, n_agents))
}

impl<T: Real> SimulationTrace<T> {
    /// Fills [`SimulationTrace::lyapunov`] with `V` built from `X`.
    pub fn attach_lyapunov(&mut self, lyap_x: &Matrix<T>) -> Result<(), SimError> {
        if lyap_x.rows() != self.n {
            return Err(SimError::DimensionMismatch(format!("X is {}x{}, states have size {}", lyap_x.rows(), lyap_x.cols(), self.n)));
        }
        let v = LyapunovFunction::new(lyap_x)?;
        self.lyapunov = Some(self.states.iter().map(|x| v.value(x, self.n_agents)).collect());
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusReport<T> {
    pub achieved: bool,
    /// First instant after which the disagreement stays below the threshold.
    pub settle_time: Option<T>,
    pub threshold: T,
    pub initial_disagreement: T,
    pub final_disagreement: T,
}

/// Consensus holds when the final disagreement is at most
/// `rel_tol · max(1, initial disagreement)`.
pub fn check_consensus<T: Real>(trace: &SimulationTrace<T>, rel_tol: T) -> ConsensusReport<T> {
    let d = &trace.disagreement;
    let initial = d.first().copied().unwrap_or(T::zero());
    let last = d.last().copied().unwrap_or(T::zero());
    let threshold = rel_tol * initial.max(T::one());
    let achieved = !d.is_empty() && last <= threshold;
    let settle_time = achieved.then(|| {
        let first_ok = d.iter().rposition(|&v| !(v <= threshold)).map_or(0, |j| j + 1);
        trace.times[first_ok]
    });
    ConsensusReport { achieved, settle_time, threshold, initial_disagreement: initial, final_disagreement: last }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport<T> {
    /// Steps with `V(t_j)` above the floor.
    pub checked: usize,
    /// Checked steps with `V(t_{j+1}) ≤ V(t_j)·e^{−rate·dt}`.
    pub satisfied: usize,
    pub fraction: f64,
    /// Smallest observed `−ln(V_{j+1}/V_j)/dt` over checked steps.
    pub min_rate: Option<T>,
}

/// Relative floor below which `V` is treated as converged and decay steps
/// are no longer counted.
pub const LYAPUNOV_FLOOR: f64 = 1e-20;

/// Counts steps satisfying `V(t_{j+1}) ≤ V(t_j)·e^{−rate·dt}`.
pub fn lyapunov_decay<T: Real>(trace: &SimulationTrace<T>, rate: T) -> Option<DecayReport<T>> {
    let v = trace.lyapunov.as_ref()?;
    let floor = T::lit(LYAPUNOV_FLOOR) * v.first().copied().unwrap_or(T::zero());
    let factor = (-rate * trace.dt).exp();
    let (mut checked, mut satisfied) = (0usize, 0usize);
    let mut min_rate: Option<T> = None;
    for w in v.windows(2) {
        if !(w[0] > floor) {
            continue;
        }
        checked += 1;
        if w[1] <= w[0] * factor {
            satisfied += 1;
        }
        let observed = -(w[1].max(T::min_positive_value()) / w[0]).ln() / trace.dt;
        min_rate = Some(min_rate.map_or(observed, |r: T| r.min(observed)));
    }
    let fraction = if checked == 0 { 1.0 } else { satisfied as f64 / checked as f64 };
    Some(DecayReport { checked, satisfied, fraction, min_rate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::realize_room_model;
    use crate::lmi::SectorBounds;

    #[test]
    fn disagreement_examples() {
        assert_eq!(disagreement(&[1.0, 2.0, 1.0, 2.0], 2), 0.0);
        assert!((disagreement(&[1.0, -1.0], 2) - 2f64.sqrt()).abs() < 1e-15);
        let x = [0.3, -1.0, 4.0, 2.0, 0.5, 0.5];
        let shifted: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + if i % 2 == 0 { 7.0 } else { -3.0 }).collect();
        assert!((disagreement(&x, 3) - disagreement(&shifted, 3)).abs() < 1e-12);
        assert!(try_disagreement(&[1.0, 2.0, 3.0], 2).is_err());
    }

    #[test]
    fn lyapunov_with_identity_is_squared_disagreement() {
        let x: [f64; 6] = [0.3, -1.0, 4.0, 2.0, 0.5, 0.5];
        let v = lyapunov_value(&x, 3, &Matrix::identity(2)).unwrap();
        assert!((v - disagreement(&x, 3).powi(2)).abs() < 1e-12);
        assert_eq!(lyapunov_value(&[1.0, 2.0, 1.0, 2.0], 2, &Matrix::identity(2)).unwrap(), 0.0);
    }

    #[test]
    fn consensus_subspace_is_invariant() {
        let d = realize_room_model(10.0, 50.0).unwrap();
        let g = Graph::complete(3).unwrap();
        let f = Nonlinearity::saturation(vec![-0.2], vec![0.1]).unwrap();
        let k = Matrix::from_rows(&[[-1.0, -3.0]]);
        let x0 = [1.5, -0.2, 1.5, -0.2, 1.5, -0.2];
        let tr = simulate(&d, &g, &k, &f, &x0, 0.1, 10.0).unwrap();
        assert_eq!(tr.len(), 101);
        assert!(tr.z_signals.iter().flatten().all(|&z| z == 0.0));
        assert!(tr.inputs.iter().flatten().all(|&u| u == 0.0));
        assert!(tr.disagreement.iter().all(|&v| v <= 1e-14));
        let rep = check_consensus(&tr, 1e-3);
        assert!(rep.achieved);
        assert_eq!(rep.settle_time, Some(0.0));
    }

    #[test]
    fn zero_gain_does_not_reach_consensus() {
        let d = realize_room_model(10.0f64, 50.0).unwrap();
        let g = Graph::path(3).unwrap();
        let f = Nonlinearity::saturation(vec![-0.2], vec![0.1]).unwrap();
        let x0 = [0.0, 0.0, 5.0, 0.0, -3.0, 0.0];
        let tr = simulate(&d, &g, &Matrix::zeros(1, 2), &f, &x0, 0.5, 100.0).unwrap();
        assert!(!check_consensus(&tr, 1e-3).achieved);
        assert!(tr.disagreement.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12));
    }

    #[test]
    fn divergence_is_reported() {
        let d = AgentDynamics::new(Matrix::from_rows(&[[0.0]]), Matrix::from_rows(&[[1.0]])).unwrap();
        let g = Graph::complete(2).unwrap();
        let f = Nonlinearity::static_gain(vec![1.0], SectorBounds::uniform(1, 0.5, 2.0).unwrap()).unwrap();
        // positive feedback on the disagreement
        let err = simulate(&d, &g, &Matrix::from_rows(&[[5.0]]), &f, &[1.0, -1.0], 0.1, 100.0).unwrap_err();
        assert!(matches!(err, SimError::Divergence { .. }));
    }

    #[test]
    fn time_grid_validation() {
        let d = realize_room_model(10.0, 50.0).unwrap();
        let g = Graph::complete(2).unwrap();
        let f = Nonlinearity::saturation(vec![-1.0], vec![1.0]).unwrap();
        let k = Matrix::zeros(1, 2);
        assert!(simulate(&d, &g, &k, &f, &[0.0; 4], 0.0, 1.0).is_err());
        assert!(simulate(&d, &g, &k, &f, &[0.0; 4], 2.0, 1.0).is_err());
        assert!(simulate(&d, &g, &k, &f, &[0.0; 3], 0.1, 1.0).is_err());
    }
}
