//! End-to-end gain synthesis: topology dispatch, assumption checks, LMI
//! solve, certification and `K = Y X⁻¹`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dynamics::{AgentDynamics, DynamicsError};
use crate::graph::{Graph, GraphError};
use crate::linalg::{singular_values, Cholesky, Matrix};
use crate::lmi::{assemble_directed_cycle, assemble_undirected, riccati_residual, CycleVariant, Decision, LmiError, LmiProblem, SectorBounds};
use crate::scalar::Real;
use crate::sdp::{certify, solve_feasibility, LmiSolution, MarginReport, SdpError, SolverOptions, SolverStatus};

/// Condition number of `X` above which the gain is not trusted.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Assumption {
    /// `(A, B)` stabilizable.
    A1,
    /// Spectrum of `A` in the closed left half plane.
    A2,
    /// Graph balanced with a spanning tree.
    A3,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error("assumption {assumption:?} violated: {detail}")]
    AssumptionViolated { assumption: Assumption, detail: String },
    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),
    #[error("LMI not solved ({status:?}): best margin {best_margin:.3e}, lower bound {lower_bound:.3e}, worst block {worst_block:?}")]
    Infeasible { status: SolverStatus, best_margin: f64, lower_bound: f64, worst_block: Option<usize> },
    #[error("X is ill conditioned (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },
    #[error("solver answer failed independent certification (margin {margin:.3e})")]
    CertificationFailed { margin: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Lmi(#[from] LmiError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    Undirected,
    DirectedCycle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumUsed<T> {
    Extremes { lambda2: T, lambda_n: T },
    Cycle { n_agents: usize },
}

/// Residual of the quadratic (Schur-complemented) form at one nonzero
/// Laplacian eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenvalueCheck<T> {
    pub lambda: T,
    pub residual: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOptions {
    pub solver: SolverOptions,
    pub cycle_variant: CycleVariant,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self { solver: SolverOptions::default(), cycle_variant: CycleVariant::Literal }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real + Serialize"))]
pub struct SynthesisResult<T> {
    pub k: Matrix<T>,
    pub solution: LmiSolution<T>,
    pub theorem: Theorem,
    pub cycle_variant: Option<CycleVariant>,
    pub eps: T,
    pub spectrum_used: SpectrumUsed<T>,
    /// Margin actually required of the solver.
    pub tolerance: f64,
    pub certificate: MarginReport<T>,
    pub solver_iterations: usize,
    /// Undirected graphs only: the quadratic form at every nonzero eigenvalue.
    pub eigenvalue_checks: Vec<EigenvalueCheck<T>>,
}

/// `1e-7 · (1 + ‖A‖₂)`, floored at the solver tolerance.
pub fn strictness<T: Real>(d: &AgentDynamics<T>, requested: f64) -> f64 {
    requested.max(1e-7 * (1.0 + d.a().norm2().as_f64()))
}

/// A1 and A2 on the agent, then A3 on the graph.
pub fn check_assumptions<T: Real>(d: &AgentDynamics<T>, g: &Graph<T>) -> Result<(), SynthesisError> {
    if let Some(mode) = d.uncontrollable_mode()? {
        return Err(SynthesisError::AssumptionViolated {
            assumption: Assumption::A1,
            detail: format!("[A - lambda I, B] loses rank at lambda = {}", fmt_complex(mode)),
        });
    }
    let right = d.rightmost_eigenvalue()?;
    if !d.check_spectrum_closed_left()? {
        return Err(SynthesisError::AssumptionViolated {
            assumption: Assumption::A2,
            detail: format!("A has eigenvalue {} in the open right half plane", fmt_complex(right)),
        });
    }
    if let Some(v) = (0..g.n_agents()).find(|&i| (g.in_degree(i) - g.out_degree(i)).abs() > T::tol(1e-12) * g.weights().max_abs().max(T::one())) {
        return Err(SynthesisError::AssumptionViolated {
            assumption: Assumption::A3,
            detail: format!("vertex {v} has in-degree {} and out-degree {}", g.in_degree(v), g.out_degree(v)),
        });
    }
    if !g.has_spanning_tree() {
        return Err(SynthesisError::AssumptionViolated { assumption: Assumption::A3, detail: "graph has no spanning tree".into() });
    }
    Ok(())
}

fn fmt_complex<T: Real>(z: Complex<T>) -> String {
    if z.im == T::zero() {
        format!("{}", z.re)
    } else {
        format!("{}{:+}j", z.re, z.im)
    }
}

/// Which theorem applies to `g`, if any.
pub fn select_theorem<T: Real>(g: &Graph<T>) -> Result<Theorem, SynthesisError> {
    if g.has_symmetric_weights() {
        Ok(Theorem::Undirected)
    } else if g.is_unweighted_directed_cycle() {
        Ok(Theorem::DirectedCycle)
    } else {
        Err(SynthesisError::UnsupportedTopology(
            "the graph is neither undirected nor an unweighted directed cycle".into(),
        ))
    }
}

/// The LMI problem `synthesize` would solve.
pub fn build_problem<T: Real>(
    d: &AgentDynamics<T>,
    g: &Graph<T>,
    s: &SectorBounds<T>,
    eps: T,
    variant: CycleVariant,
) -> Result<(LmiProblem<T>, Theorem, SpectrumUsed<T>), SynthesisError> {
    let theorem = select_theorem(g)?;
    match theorem {
        Theorem::Undirected => {
            let spec = g.spectrum()?;
            let nonzero = spec.real_nonzero().ok_or_else(|| {
                SynthesisError::Graph(GraphError::InvalidWeights("symmetric Laplacian with complex spectrum".into()))
            })?;
            let (lambda2, lambda_n) = match (nonzero.first(), nonzero.last()) {
                (Some(&a), Some(&b)) => (a, b),
                _ => return Err(SynthesisError::UnsupportedTopology("a single agent has no consensus problem".into())),
            };
            let p = assemble_undirected(d, s, lambda2, lambda_n, eps)?;
            Ok((p, theorem, SpectrumUsed::Extremes { lambda2, lambda_n }))
        }
        Theorem::DirectedCycle => {
            let n = g.n_agents();
            let p = assemble_directed_cycle(d, s, n, eps, variant)?;
            Ok((p, theorem, SpectrumUsed::Cycle { n_agents: n }))
        }
    }
}

pub fn synthesize<T: Real>(
    d: &AgentDynamics<T>,
    g: &Graph<T>,
    s: &SectorBounds<T>,
    eps: T,
    opts: &SynthesisOptions,
) -> Result<SynthesisResult<T>, SynthesisError> {
    select_theorem(g)?;
    check_assumptions(d, g)?;
    let (problem, theorem, spectrum_used) = build_problem(d, g, s, eps, opts.cycle_variant)?;
    let tolerance = strictness(d, opts.solver.tolerance);
    let solver = SolverOptions { tolerance, ..opts.solver.clone() };
    let outcome = solve_feasibility(&problem, &solver)?;
    let solution = match (outcome.status, outcome.solution) {
        (SolverStatus::Feasible, Some(sol)) => sol,
        (status, _) => {
            return Err(SynthesisError::Infeasible {
                status,
                best_margin: outcome.best_margin.as_f64(),
                lower_bound: outcome.lower_bound.as_f64(),
                worst_block: outcome.worst_block,
            })
        }
    };
    let certificate = certify(&problem, &solution.decision, tolerance)?;
    if !certificate.passed {
        return Err(SynthesisError::CertificationFailed { margin: certificate.margin.as_f64() });
    }
    let k = gain_from_solution(&solution.decision)?;

    let mut eigenvalue_checks = Vec::new();
    if theorem == Theorem::Undirected {
        if let Some(nonzero) = g.spectrum()?.real_nonzero() {
            for lambda in nonzero {
                let residual = riccati_residual(d, s, lambda, eps, &solution.decision)?;
                eigenvalue_checks.push(EigenvalueCheck { lambda, residual });
            }
        }
    }

    Ok(SynthesisResult {
        k,
        solution,
        theorem,
        cycle_variant: (theorem == Theorem::DirectedCycle).then_some(opts.cycle_variant),
        eps,
        spectrum_used,
        tolerance,
        certificate,
        solver_iterations: outcome.iterations,
        eigenvalue_checks,
    })
}

/// `K = Y X⁻¹`, refusing `X` with condition number above [`MAX_CONDITION`].
pub fn gain_from_solution<T: Real>(v: &Decision<T>) -> Result<Matrix<T>, SynthesisError> {
    let sv = singular_values(&v.x);
    let (max, min) = (sv.first().copied().unwrap_or(T::zero()), sv.last().copied().unwrap_or(T::zero()));
    let condition = if min > T::zero() { (max / min).as_f64() } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(SynthesisError::IllConditioned { condition });
    }
    let chol = Cholesky::new(&v.x).map_err(|_| SynthesisError::IllConditioned { condition })?;
    // K X = Y  ⇔  X Kᵀ = Yᵀ
    let k = chol.solve(&v.y.transpose()).transpose();
    let back = &(&k * &v.x) - &v.y;
    let scale = v.y.frobenius_norm().max(T::min_positive_value());
    if back.frobenius_norm() > T::tol(1e-9) * scale {
        return Err(SynthesisError::IllConditioned { condition });
    }
    Ok(k)
}
