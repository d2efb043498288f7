//! Dense barrier solver for structured LMI feasibility problems.
//!
//! The solver minimizes `t` over `w = (v, t)` subject to
//!
//! * `t·I − F_b(v) ⪰ 0` for every block,
//! * `X + (t − s)·I ⪰ 0` and `Z_kk + t − s ≥ 0`,
//! * `tr X + Σ Z_kk ≤ R` (the problem is homogeneous, so some bound on the
//!   scale of the decision is needed for `t` to have a finite optimum),
//! * `‖vec Y‖ ≤ ρ`,
//!
//! with `η` the requested margin. The floor `s` is `η`, or a fixed fraction
//! of the normalization scale when every block is linear in `v` (scaling a
//! strictly feasible point then keeps it strictly feasible). Each constraint is written as
//! `G_j(w) = C_j + Σ_k w_k G_{j,k} ⪰ 0` and the central path of
//! `τ·t − Σ_j log det G_j(w)` is followed with damped Newton steps.
//! Only Cholesky factorizations are used inside the iteration.

use serde::{Deserialize, Serialize};

use crate::linalg::{symmetric_eigen, Cholesky, LinalgError, Matrix};
use crate::lmi::{residual, Decision, LmiError, LmiProblem, Residuals};
use crate::scalar::Real;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("bad solver options: {0}")]
    BadOptions(String),
    #[error(transparent)]
    Lmi(#[from] LmiError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Cap on the total number of Newton steps.
    pub max_iterations: usize,
    /// Required margin `η`: blocks `⪯ −η·I`, `X ⪰ η·I`, `Z ⪰ η·I`.
    pub tolerance: f64,
    /// Initial `X = Z = initial_scale·I`; also sets the normalization bound.
    pub initial_scale: f64,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iterations: 200, tolerance: 1e-7, initial_scale: 1.0, verbose: false }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<(), SdpError> {
        if self.max_iterations == 0 {
            return Err(SdpError::BadOptions("max_iterations must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(SdpError::BadOptions(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if !(self.initial_scale > 0.0) || !self.initial_scale.is_finite() {
            return Err(SdpError::BadOptions(format!("initial_scale must be positive, got {}", self.initial_scale)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverStatus {
    Feasible,
    Infeasible,
    IterationLimit,
}

/// A solution triple with the solver's bound on its largest residual.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real + Serialize"))]
pub struct LmiSolution<T> {
    #[serde(flatten)]
    pub decision: Decision<T>,
    pub margin: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real + Serialize"))]
pub struct SolverOutcome<T> {
    pub status: SolverStatus,
    pub solution: Option<LmiSolution<T>>,
    /// Smallest epigraph value `t` reached. Every residual of the matching
    /// iterate is at most this.
    pub best_margin: T,
    /// Lower bound on the optimal `t` from the last centering.
    pub lower_bound: T,
    pub iterations: usize,
    /// Block with the largest value at the best iterate.
    pub worst_block: Option<usize>,
}

/// `C + Σ_k w_k G_k ⪰ 0`; absent coefficients are zero.
struct Constraint<T> {
    constant: Matrix<T>,
    coef: Vec<Option<Matrix<T>>>,
}

impl<T: Real> Constraint<T> {
    fn new(size: usize, n_w: usize) -> Self {
        Self { constant: Matrix::zeros(size, size), coef: (0..n_w).map(|_| None).collect() }
    }

    fn size(&self) -> usize {
        self.constant.rows()
    }

    fn evaluate(&self, w: &[T]) -> Matrix<T> {
        let mut out = self.constant.clone();
        for (c, &wk) in self.coef.iter().zip(w) {
            if let Some(c) = c {
                out.axpy(wk, c);
            }
        }
        out
    }
}

fn nonzero<T: Real>(m: Matrix<T>) -> Option<Matrix<T>> {
    (m.max_abs() != T::zero()).then_some(m)
}

struct Barrier<T> {
    constraints: Vec<Constraint<T>>,
    /// Barrier parameter `Σ_j size(G_j)`.
    theta: T,
    n_blocks: usize,
}

impl<T: Real> Barrier<T> {
    /// `floor` is the level `X` and `Z` must exceed by `−t`.
    fn build(p: &LmiProblem<T>, floor: T, scale: T) -> Self {
        let (n, m) = (p.n, p.m);
        let nv = p.n_vars();
        let n_w = nv + 1;
        let t = nv;
        let mut constraints = Vec::new();

        for b in &p.blocks {
            let k = b.size();
            let mut c = Constraint::new(k, n_w);
            c.constant = b.constant.scale(-T::one());
            for (slot, f) in c.coef.iter_mut().zip(&b.coefficients) {
                *slot = nonzero(f.scale(-T::one()));
            }
            c.coef[t] = Some(Matrix::identity(k));
            constraints.push(c);
        }

        let basis = |k: usize| {
            let mut e = vec![T::zero(); nv];
            e[k] = T::one();
            Decision::from_flat(n, m, &e).expect("basis length")
        };
        let x_vars = n * (n + 1) / 2;
        let y_vars = m * n;

        let mut cx = Constraint::new(n, n_w);
        cx.constant = Matrix::identity(n).scale(-floor);
        for k in 0..x_vars {
            cx.coef[k] = Some(basis(k).x);
        }
        cx.coef[t] = Some(Matrix::identity(n));
        constraints.push(cx);

        if m > 0 {
            let mut cz = Constraint::new(m, n_w);
            cz.constant = Matrix::identity(m).scale(-floor);
            for j in 0..m {
                let mut e = Matrix::zeros(m, m);
                e[(j, j)] = T::one();
                cz.coef[x_vars + y_vars + j] = Some(e);
            }
            cz.coef[t] = Some(Matrix::identity(m));
            constraints.push(cz);
        }

        let radius = T::two() * T::lit((n + m) as f64) * scale;
        let mut cn = Constraint::new(1, n_w);
        cn.constant[(0, 0)] = radius;
        for k in 0..nv {
            let b = basis(k);
            let w = b.x.trace() + b.z.iter().copied().sum::<T>();
            if w != T::zero() {
                cn.coef[k] = Some(Matrix::from_vec(1, 1, vec![-w]));
            }
        }
        constraints.push(cn);

        if y_vars > 0 {
            let rho = T::lit(1e3) * radius;
            let size = y_vars + 1;
            let mut cy = Constraint::new(size, n_w);
            cy.constant = Matrix::identity(size).scale(rho);
            for j in 0..y_vars {
                let mut e = Matrix::zeros(size, size);
                e[(j, y_vars)] = T::one();
                e[(y_vars, j)] = T::one();
                cy.coef[x_vars + j] = Some(e);
            }
            constraints.push(cy);
        }

        let theta = T::lit(constraints.iter().map(Constraint::size).sum::<usize>() as f64);
        Self { constraints, theta, n_blocks: p.blocks.len() }
    }

    fn factor(&self, w: &[T]) -> Option<Vec<Cholesky<T>>> {
        self.constraints.iter().map(|c| Cholesky::new(&c.evaluate(w)).ok()).collect()
    }

    /// `τ·t − Σ log det G_j`, or `None` outside the domain.
    fn objective(&self, w: &[T], tau: T) -> Option<T> {
        let f = self.factor(w)?;
        let t = *w.last().expect("w has t");
        Some(tau * t - f.iter().map(Cholesky::log_det).sum::<T>())
    }

    fn gradient_hessian(&self, factors: &[Cholesky<T>], tau: T) -> (Vec<T>, Matrix<T>) {
        let n_w = self.constraints[0].coef.len();
        let mut g = vec![T::zero(); n_w];
        g[n_w - 1] = tau;
        let mut h = Matrix::zeros(n_w, n_w);
        for (c, f) in self.constraints.iter().zip(factors) {
            // M_k = G⁻¹ G_k
            let m: Vec<Option<Matrix<T>>> = c.coef.iter().map(|gk| gk.as_ref().map(|gk| f.solve(gk))).collect();
            for k in 0..n_w {
                let Some(mk) = &m[k] else { continue };
                g[k] -= mk.trace();
                for l in k..n_w {
                    let Some(ml) = &m[l] else { continue };
                    let v = Matrix::trace_of_product(mk, ml);
                    h[(k, l)] += v;
                    if l != k {
                        h[(l, k)] += v;
                    }
                }
            }
        }
        (g, h)
    }

    fn max_block_value(&self, w: &[T]) -> (T, Option<usize>) {
        // block b is t·I − F_b, so λmax(F_b) = t − λmin(G_b)
        let t = *w.last().expect("w has t");
        let mut best = (T::neg_infinity(), None);
        for (b, c) in self.constraints[..self.n_blocks].iter().enumerate() {
            let lmin = symmetric_eigen(&c.evaluate(w)).map(|e| e.values[0]).unwrap_or(T::nan());
            let v = t - lmin;
            if !(v <= best.0) {
                best = (v, Some(b));
            }
        }
        best
    }
}

fn solve_spd<T: Real>(h: &Matrix<T>, g: &[T]) -> Result<Vec<T>, SdpError> {
    let scale = (0..h.rows()).map(|i| h[(i, i)].abs()).fold(T::zero(), T::max).max(T::min_positive_value());
    let mut ridge = T::zero();
    for _ in 0..8 {
        if let Ok(c) = Cholesky::new(&h.add_diag(ridge)) {
            return Ok(c.solve_vec(g));
        }
        ridge = if ridge == T::zero() { scale * T::epsilon() * T::lit(16.0) } else { ridge * T::lit(100.0) };
    }
    Err(SdpError::NumericalBreakdown("Newton system is not positive definite".into()))
}

const ARMIJO: f64 = 0.25;
const TAU_GROWTH: f64 = 10.0;
const CENTERING_TOL: f64 = 1e-9;
const GAP_REL_TOL: f64 = 1e-6;
/// Strictness floor of homogeneous problems relative to the decision scale.
const HOMOGENEOUS_FLOOR: f64 = 1e-3;

/// Searches for `(X, Y, Z)` with every residual at most `−opts.tolerance`.
///
/// `Feasible` is reported once the iterate reaches `t ≤ −η` and the barrier
/// gap is small, `Infeasible` once the lower bound `t − θ/τ` exceeds `−η`.
pub fn solve_feasibility<T: Real>(p: &LmiProblem<T>, opts: &SolverOptions) -> Result<SolverOutcome<T>, SdpError> {
    opts.validate()?;
    let eta = T::tol(opts.tolerance);
    let scale = T::lit(opts.initial_scale);
    // Homogeneous problems are invariant under positive scaling, so their
    // strictness floor can sit a fixed ratio below the normalization scale
    // instead of at η, which keeps the barrier Hessian well conditioned.
    let homogeneous = p.blocks.iter().all(|b| b.constant.max_abs() == T::zero());
    let floor = if homogeneous { (scale * T::lit(HOMOGENEOUS_FLOOR)).max(eta) } else { eta };
    let barrier = Barrier::build(p, floor, scale);
    let nv = p.n_vars();

    let start = Decision { x: Matrix::identity(p.n).scale(scale), y: Matrix::zeros(p.m, p.n), z: vec![scale; p.m] };
    let mut w = start.to_flat();
    let mut r_max = T::neg_infinity();
    for b in p.evaluate(&start)? {
        let e = symmetric_eigen(&b).map_err(|e| SdpError::NumericalBreakdown(format!("initial block: {e}")))?;
        r_max = r_max.max(*e.values.last().unwrap_or(&T::neg_infinity()));
    }
    if !r_max.is_finite() {
        r_max = T::zero();
    }
    w.push(r_max.max(T::zero()) + r_max.abs().max(T::one()));

    let mut tau = T::one() / w[nv].abs().max(T::one());
    let mut iterations = 0;
    let mut lower_bound = T::neg_infinity();
    let mut status = None;

    'outer: while iterations < opts.max_iterations {
        // centering
        loop {
            if iterations >= opts.max_iterations {
                break 'outer;
            }
            let factors = barrier
                .factor(&w)
                .ok_or_else(|| SdpError::NumericalBreakdown("iterate left the barrier domain".into()))?;
            let (g, h) = barrier.gradient_hessian(&factors, tau);
            let neg_g: Vec<T> = g.iter().map(|&x| -x).collect();
            let dw = solve_spd(&h, &neg_g)?;
            let decrement: T = -g.iter().zip(&dw).map(|(&a, &b)| a * b).sum::<T>();
            iterations += 1;
            if !decrement.is_finite() {
                return Err(SdpError::NumericalBreakdown("non-finite Newton decrement".into()));
            }
            if decrement * T::half() <= T::lit(CENTERING_TOL) {
                break;
            }
            let f0 = barrier.objective(&w, tau).expect("current iterate is interior");
            let mut alpha = T::one();
            let mut moved = false;
            for _ in 0..60 {
                let trial: Vec<T> = w.iter().zip(&dw).map(|(&a, &d)| a + alpha * d).collect();
                if let Some(f) = barrier.objective(&trial, tau) {
                    if f <= f0 - T::lit(ARMIJO) * alpha * decrement {
                        w = trial;
                        moved = true;
                        break;
                    }
                }
                alpha *= T::half();
            }
            if !moved {
                // no further progress at this τ
                break;
            }
        }

        let t = w[nv];
        let gap = barrier.theta / tau;
        lower_bound = t - gap;
        if opts.verbose {
            eprintln!(
                "sdp: iter {iterations:4} tau {:.3e} t {:.6e} lower {:.6e}",
                tau.as_f64(),
                t.as_f64(),
                lower_bound.as_f64()
            );
        }
        if lower_bound > -eta {
            status = Some(SolverStatus::Infeasible);
            break;
        }
        if t <= -eta && gap <= T::tol(GAP_REL_TOL) * t.abs().max(T::one()) {
            status = Some(SolverStatus::Feasible);
            break;
        }
        if gap <= T::epsilon() * t.abs().max(T::one()) {
            break;
        }
        tau *= T::lit(TAU_GROWTH);
    }

    let t = w[nv];
    let status = status.unwrap_or(if t <= -eta { SolverStatus::Feasible } else { SolverStatus::IterationLimit });
    let decision = Decision::from_flat(p.n, p.m, &w[..nv])?;
    let (_, worst_block) = barrier.max_block_value(&w);
    let solution = (status == SolverStatus::Feasible).then(|| LmiSolution { decision, margin: t });
    Ok(SolverOutcome { status, solution, best_margin: t, lower_bound, iterations, worst_block })
}

/// Result of re-checking a candidate with the independent residual routine.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginReport<T> {
    pub residuals: Residuals<T>,
    /// Largest residual over all blocks and strictness constraints.
    pub margin: T,
    pub tolerance: T,
    pub passed: bool,
}

/// Recomputes every residual of `v`; passes iff all are `≤ −tolerance`.
pub fn certify<T: Real>(p: &LmiProblem<T>, v: &Decision<T>, tolerance: f64) -> Result<MarginReport<T>, LmiError> {
    let residuals = residual(p, v)?;
    let margin = residuals.max();
    let tolerance = T::tol(tolerance);
    Ok(MarginReport { passed: margin <= -tolerance, margin, tolerance, residuals })
}

impl From<LinalgError> for SdpError {
    fn from(e: LinalgError) -> Self {
        SdpError::NumericalBreakdown(e.to_string())
    }
}
