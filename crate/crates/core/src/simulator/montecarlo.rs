use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::AgentDynamics;
use crate::graph::Graph;
use crate::linalg::Matrix;
use crate::lmi::SectorBounds;
use crate::scalar::Real;

use super::{check_consensus, simulate, ConsensusReport, Nonlinearity, SimError};

/// Uncertain-gain sweep: `fixed` gain vectors first, then `random_runs`
/// draws from the sector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSpec<T> {
    pub random_runs: usize,
    pub seed: u64,
    /// Agent-major gain vectors with `N·m` entries each.
    pub fixed: Vec<Vec<T>>,
    pub dt: T,
    pub horizon: T,
    pub rel_tol: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary<T> {
    pub consensus: ConsensusReport<T>,
    pub max_sector_product: T,
    pub input_min: T,
    pub input_max: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloRun<T> {
    pub index: usize,
    pub gains: Vec<T>,
    pub outcome: Result<RunSummary<T>, String>,
}

/// `runs` gain vectors with entries drawn uniformly from each channel's
/// `[δ₁, δ₂]`, generated sequentially from one seeded stream.
pub fn draw_gains<T: Real>(sector: &SectorBounds<T>, n_agents: usize, runs: usize, seed: u64) -> Vec<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = sector.m();
    (0..runs)
        .map(|_| {
            (0..n_agents * m)
                .map(|idx| {
                    let (lo, hi) = (sector.delta1()[idx % m].as_f64(), sector.delta2()[idx % m].as_f64());
                    T::lit(rng.gen_range(lo..=hi))
                })
                .collect()
        })
        .collect()
}

/// Runs every gain vector in parallel; results are returned in input order.
pub fn monte_carlo<T: Real>(
    d: &AgentDynamics<T>,
    g: &Graph<T>,
    k: &Matrix<T>,
    sector: &SectorBounds<T>,
    x0: &[T],
    spec: &MonteCarloSpec<T>,
) -> Result<Vec<MonteCarloRun<T>>, SimError> {
    let width = g.n_agents() * sector.m();
    if let Some(bad) = spec.fixed.iter().find(|v| v.len() != width) {
        return Err(SimError::DimensionMismatch(format!("fixed gain vector has {} entries, expected {width}", bad.len())));
    }
    let mut all = spec.fixed.clone();
    all.extend(draw_gains(sector, g.n_agents(), spec.random_runs, spec.seed));
    Ok(all
        .into_par_iter()
        .enumerate()
        .map(|(index, gains)| {
            let outcome = Nonlinearity::static_gain(gains.clone(), sector.clone())
                .and_then(|f| simulate(d, g, k, &f, x0, spec.dt, spec.horizon))
                .map(|tr| {
                    let (input_min, input_max) = tr.input_range();
                    RunSummary {
                        consensus: check_consensus(&tr, spec.rel_tol),
                        max_sector_product: tr.max_sector_product(sector),
                        input_min,
                        input_max,
                    }
                })
                .map_err(|e| e.to_string());
            MonteCarloRun { index, gains, outcome }
        })
        .collect())
}
