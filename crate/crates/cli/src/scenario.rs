//! TOML scenario files.

use std::path::Path;

use anyhow::{bail, Context};
use lure_consensus::dynamics::{realize_room_model, AgentDynamics};
use lure_consensus::graph::Graph;
use lure_consensus::lmi::{CycleVariant, SectorBounds};
use lure_consensus::sdp::SolverOptions;
use lure_consensus::simulator::{Nonlinearity, DEFAULT_REL_TOL};
use lure_consensus::{Graph64, Matrix64};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub dynamics: DynamicsSpec,
    pub graph: GraphSpec,
    pub sector: SectorSpec,
    pub eps: f64,
    /// Values used by `sweep-eps` when no `--eps` is given.
    #[serde(default)]
    pub eps_sweep: Vec<f64>,
    #[serde(default = "default_true")]
    pub literal_directed_lmi: bool,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub solver: SolverSpec,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DynamicsSpec {
    /// `a / (s (T s + 1))` in controllable canonical form.
    Room {
        a: f64,
        #[serde(rename = "T")]
        time_constant: f64,
    },
    Explicit { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphSpec {
    Complete { n: usize },
    Path { n: usize },
    CycleDirected { n: usize },
    /// `weights[i][j]` is the weight with which agent `i` receives from `j`.
    Matrix {
        weights: Vec<Vec<f64>>,
        #[serde(default)]
        directed: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerChannel {
    Uniform(f64),
    Channels(Vec<f64>),
}

impl PerChannel {
    fn expand(&self, m: usize, field: &str) -> anyhow::Result<Vec<f64>> {
        match self {
            Self::Uniform(v) => Ok(vec![*v; m]),
            Self::Channels(v) if v.len() == m => Ok(v.clone()),
            Self::Channels(v) => bail!("sector.{field} has {} entries but B has {m} columns", v.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SectorSpec {
    /// Clamp each channel to `[lo, hi]`; synthesized against the sector `[0, 1]`.
    Saturation { lo: PerChannel, hi: PerChannel },
    /// Static gains in `[lo, hi]` per channel; the sector is `[lo, hi]`.
    UncertainGain { lo: PerChannel, hi: PerChannel },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    /// Stacked initial state; defaults to temperatures `{0, 5, −3, …}` with
    /// all other states zero.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub monte_carlo_runs: usize,
    /// Uncertain-gain cases always simulated before the random draws
    /// (agent-major, `N·m` entries each).
    #[serde(default)]
    pub fixed_gains: Vec<Vec<f64>>,
    /// Inline `K` used by `simulate` instead of synthesizing.
    #[serde(default)]
    pub gain: Option<Vec<Vec<f64>>>,
}

fn default_dt() -> f64 {
    0.1
}

fn default_horizon() -> f64 {
    600.0
}

fn default_rel_tol() -> f64 {
    DEFAULT_REL_TOL
}

fn default_runs() -> usize {
    20
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            x0: None,
            dt: default_dt(),
            horizon: default_horizon(),
            rel_tol: default_rel_tol(),
            seed: 0,
            monte_carlo_runs: default_runs(),
            fixed_gains: vec![],
            gain: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_scale")]
    pub initial_scale: f64,
}

fn default_max_iterations() -> usize {
    SolverOptions::default().max_iterations
}

fn default_tolerance() -> f64 {
    SolverOptions::default().tolerance
}

fn default_scale() -> f64 {
    SolverOptions::default().initial_scale
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self { max_iterations: default_max_iterations(), tolerance: default_tolerance(), initial_scale: default_scale() }
    }
}

/// Temperatures cycle through these values; derivative states start at 0.
pub const DEFAULT_TEMPERATURES: [f64; 3] = [0.0, 5.0, -3.0];

/// A scenario with every sub-spec validated through the library.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub dynamics: AgentDynamics<f64>,
    pub graph: Graph64,
    pub sector: SectorBounds<f64>,
    pub x0: Vec<f64>,
}

impl Scenario {
    pub fn load(path: &Path) -> anyhow::Result<(Self, String)> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let scenario = Self::parse(&text).with_context(|| format!("in scenario {}", path.display()))?;
        Ok((scenario, text))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let s: Scenario = toml::from_str(text)?;
        if !(s.eps > 0.0) || !s.eps.is_finite() {
            bail!("eps must be positive and finite, got {}", s.eps);
        }
        Ok(s)
    }

    pub fn cycle_variant(&self) -> CycleVariant {
        if self.literal_directed_lmi {
            CycleVariant::Literal
        } else {
            CycleVariant::Derived
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            max_iterations: self.solver.max_iterations,
            tolerance: self.solver.tolerance,
            initial_scale: self.solver.initial_scale,
            verbose: false,
        }
    }

    pub fn resolve(&self) -> anyhow::Result<Resolved> {
        let dynamics = match &self.dynamics {
            DynamicsSpec::Room { a, time_constant } => realize_room_model(*a, *time_constant)?,
            DynamicsSpec::Explicit { a, b } => AgentDynamics::new(
                Matrix64::try_from_rows(a).context("dynamics.a")?,
                Matrix64::try_from_rows(b).context("dynamics.b")?,
            )?,
        };
        let graph = match &self.graph {
            GraphSpec::Complete { n } => Graph::complete(*n)?,
            GraphSpec::Path { n } => Graph::path(*n)?,
            GraphSpec::CycleDirected { n } => Graph::directed_cycle(*n)?,
            GraphSpec::Matrix { weights, directed } => {
                Graph::from_weights(Matrix64::try_from_rows(weights).context("graph.weights")?, *directed)?
            }
        };
        let m = dynamics.m();
        let sector = match &self.sector {
            SectorSpec::Saturation { .. } => {
                // validates the clamp bounds
                self.saturation(m)?;
                SectorBounds::saturation(m)
            }
            SectorSpec::UncertainGain { lo, hi } => SectorBounds::new(lo.expand(m, "lo")?, hi.expand(m, "hi")?)?,
        };
        let n_agents = graph.n_agents();
        let x0 = match &self.simulation.x0 {
            Some(x0) if x0.len() == dynamics.n() * n_agents => x0.clone(),
            Some(x0) => bail!("simulation.x0 has {} entries, expected n·N = {}", x0.len(), dynamics.n() * n_agents),
            None => default_x0(dynamics.n(), n_agents),
        };
        let sim = &self.simulation;
        if !(sim.dt > 0.0) || !(sim.horizon >= sim.dt) || !sim.horizon.is_finite() {
            bail!("simulation needs 0 < dt <= horizon, got dt = {}, horizon = {}", sim.dt, sim.horizon);
        }
        if !(sim.rel_tol > 0.0) {
            bail!("simulation.rel_tol must be positive, got {}", sim.rel_tol);
        }
        Ok(Resolved { dynamics, graph, sector, x0 })
    }

    /// The clamping nonlinearity of a saturation scenario.
    pub fn saturation(&self, m: usize) -> anyhow::Result<Option<Nonlinearity<f64>>> {
        match &self.sector {
            SectorSpec::Saturation { lo, hi } => Ok(Some(Nonlinearity::saturation(lo.expand(m, "lo")?, hi.expand(m, "hi")?)?)),
            SectorSpec::UncertainGain { .. } => Ok(None),
        }
    }

    pub fn inline_gain(&self) -> anyhow::Result<Option<Matrix64>> {
        self.simulation.gain.as_ref().map(|k| Matrix64::try_from_rows(k).context("simulation.gain")).transpose()
    }
}

/// Agent `i` starts at temperature `DEFAULT_TEMPERATURES[i mod 3]` with every
/// other state component at zero.
pub fn default_x0(n: usize, n_agents: usize) -> Vec<f64> {
    let mut x0 = vec![0.0; n * n_agents];
    for i in 0..n_agents {
        x0[i * n] = DEFAULT_TEMPERATURES[i % DEFAULT_TEMPERATURES.len()];
    }
    x0
}
