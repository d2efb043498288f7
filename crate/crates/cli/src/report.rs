//! JSON and CSV artifacts written under `--out`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use lure_consensus::lmi::{CycleVariant, Decision, SectorBounds};
use lure_consensus::sdp::SolverStatus;
use lure_consensus::simulator::{ConsensusReport, DecayReport, MonteCarloRun, SimulationTrace};
use lure_consensus::synthesis::{SynthesisError, SynthesisResult, Theorem};
use lure_consensus::Matrix64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::scenario::Scenario;

pub const REPORT: &str = "report.json";
pub const PROBLEM: &str = "problem.json";
pub const TRACE: &str = "trace.csv";
pub const TRACE_META: &str = "trace_meta.json";
pub const SUMMARY: &str = "summary.json";
pub const SWEEP: &str = "sweep.csv";

/// SHA-256 of the canonical JSON form of the effective scenario (after
/// command-line overrides).
pub fn inputs_digest(scenario: &Scenario) -> String {
    let canonical = serde_json::to_vec(scenario).expect("scenario serializes");
    hex::encode(Sha256::digest(&canonical))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub tool: String,
    pub scenario: String,
    pub inputs_digest: String,
    /// `Feasible`, `Infeasible` or `IterationLimit`; absent when synthesis
    /// stopped before the solver ran.
    pub status: Option<SolverStatus>,
    pub error: Option<String>,
    pub theorem: Option<Theorem>,
    pub cycle_variant: Option<CycleVariant>,
    pub eps: f64,
    pub delta1: Vec<f64>,
    pub delta2: Vec<f64>,
    pub spectrum: Vec<Eigenvalue>,
    pub lambda2: Option<f64>,
    pub lambda_n: Option<f64>,
    /// Strictness margin the solver was asked for.
    pub tolerance: Option<f64>,
    /// Largest certified residual (negative when feasible).
    pub margin: Option<f64>,
    pub residuals: Option<Vec<f64>>,
    pub best_margin: Option<f64>,
    pub lower_bound: Option<f64>,
    pub worst_block: Option<usize>,
    pub solver_iterations: Option<usize>,
    pub k: Option<Matrix64>,
    pub x: Option<Matrix64>,
    pub y: Option<Matrix64>,
    pub z: Option<Vec<f64>>,
    /// Quadratic form at every nonzero Laplacian eigenvalue (undirected only).
    pub eigenvalue_checks: Vec<[f64; 2]>,
}

impl SynthReport {
    pub fn new(scenario: &Scenario, digest: String, sector: &SectorBounds<f64>, spectrum: Vec<Eigenvalue>) -> Self {
        Self {
            tool: format!("lurecons {}", env!("CARGO_PKG_VERSION")),
            scenario: scenario.name.clone(),
            inputs_digest: digest,
            status: None,
            error: None,
            theorem: None,
            cycle_variant: None,
            eps: scenario.eps,
            delta1: sector.delta1().to_vec(),
            delta2: sector.delta2().to_vec(),
            spectrum,
            lambda2: None,
            lambda_n: None,
            tolerance: None,
            margin: None,
            residuals: None,
            best_margin: None,
            lower_bound: None,
            worst_block: None,
            solver_iterations: None,
            k: None,
            x: None,
            y: None,
            z: None,
            eigenvalue_checks: vec![],
        }
    }

    pub fn record_success(&mut self, r: &SynthesisResult<f64>) {
        self.status = Some(SolverStatus::Feasible);
        self.theorem = Some(r.theorem);
        self.cycle_variant = r.cycle_variant;
        self.tolerance = Some(r.tolerance);
        self.margin = Some(r.certificate.margin);
        self.residuals = Some(r.certificate.residuals.to_vec());
        self.best_margin = Some(r.solution.margin);
        self.solver_iterations = Some(r.solver_iterations);
        self.k = Some(r.k.clone());
        self.x = Some(r.solution.decision.x.clone());
        self.y = Some(r.solution.decision.y.clone());
        self.z = Some(r.solution.decision.z.clone());
        self.eigenvalue_checks = r.eigenvalue_checks.iter().map(|c| [c.lambda, c.residual]).collect();
    }

    pub fn record_failure(&mut self, e: &SynthesisError) {
        self.error = Some(e.to_string());
        if let SynthesisError::Infeasible { status, best_margin, lower_bound, worst_block } = e {
            self.status = Some(*status);
            self.best_margin = Some(*best_margin);
            self.lower_bound = Some(*lower_bound);
            self.worst_block = *worst_block;
        }
        if let SynthesisError::CertificationFailed { margin } = e {
            self.margin = Some(*margin);
        }
    }

    pub fn decision(&self) -> anyhow::Result<Decision<f64>> {
        let (x, y, z) = match (&self.x, &self.y, &self.z) {
            (Some(x), Some(y), Some(z)) => (x.clone(), y.clone(), z.clone()),
            _ => anyhow::bail!("report has no solution (status {:?})", self.status),
        };
        Ok(Decision::new(x, y, z)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceMeta {
    pub inputs_digest: String,
    pub k: Matrix64,
    pub eps: f64,
    pub delta1: Vec<f64>,
    pub delta2: Vec<f64>,
    pub nonlinearity: String,
    /// Agent-major static gains of the traced run (uncertain-gain scenarios).
    pub gains: Option<Vec<f64>>,
    pub seed: u64,
    pub dt: f64,
    pub horizon: f64,
    pub x0: Vec<f64>,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub seed: u64,
    pub runs: usize,
    pub achieved: usize,
    pub all_achieved: bool,
    pub results: Vec<MonteCarloRun<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub inputs_digest: String,
    pub gain_source: String,
    pub k: Matrix64,
    pub eps: f64,
    /// Largest residual when the report's solution is re-certified.
    pub recertified_margin: Option<f64>,
    pub consensus: ConsensusReport<f64>,
    pub input_min: f64,
    pub input_max: f64,
    pub max_abs_input: f64,
    pub max_sector_product: f64,
    pub sector_violations: usize,
    /// Checked against `V(t_{j+1}) ≤ V(t_j) e^{−0.9 ε dt}`.
    pub lyapunov_decay: Option<DecayReport<f64>>,
    pub monte_carlo: Option<MonteCarloSummary>,
}

pub fn write_json<S: Serialize>(dir: &Path, name: &str, value: &S) -> anyhow::Result<()> {
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_report(path: &Path) -> anyhow::Result<SynthReport> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_trace(dir: &Path, trace: &SimulationTrace<f64>) -> anyhow::Result<()> {
    let path = dir.join(TRACE);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(trace.column_names())?;
    let has_v = trace.lyapunov.is_some();
    for row in trace.rows() {
        let last = row.len() - 1;
        w.write_record(row.iter().enumerate().map(|(i, v)| if i == last && !has_v { String::new() } else { v.to_string() }))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub status: String,
    pub margin: Option<f64>,
    pub lower_bound: Option<f64>,
    /// Entries of `K`, row-major, separated by `;`.
    pub k: String,
    pub solver_iterations: Option<usize>,
    pub achieved: Option<bool>,
    pub settle_time: Option<f64>,
}

pub fn write_sweep(dir: &Path, rows: &[SweepRow]) -> anyhow::Result<()> {
    let path = dir.join(SWEEP);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_changes_with_effective_inputs() {
        let text = r#"
            eps = 0.1
            [dynamics]
            kind = "room"
            a = 10.0
            T = 50.0
            [graph]
            kind = "path"
            n = 3
            [sector]
            kind = "uncertain-gain"
            lo = 0.7
            hi = 1.2
        "#;
        let mut s = Scenario::parse(text).unwrap();
        let d1 = inputs_digest(&s);
        assert_eq!(d1.len(), 64);
        assert_eq!(d1, inputs_digest(&Scenario::parse(text).unwrap()));
        s.eps = 0.05;
        assert_ne!(d1, inputs_digest(&s));
    }
}
