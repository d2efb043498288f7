//! The four subcommands.

use std::path::Path;

use lure_consensus::lmi::{CycleVariant, SectorBounds};
use lure_consensus::sdp::certify;
use lure_consensus::simulator::{
    check_consensus, draw_gains, lyapunov_decay, monte_carlo, simulate, MonteCarloSpec, Nonlinearity, SimulationTrace,
    SECTOR_TOL,
};
use lure_consensus::synthesis::{build_problem, select_theorem, synthesize, SynthesisOptions, SynthesisResult, Theorem};
use lure_consensus::Matrix64;

use crate::exit::{Code, Failure, OrConfig, Result};
use crate::report::{
    self, inputs_digest, write_json, write_sweep, write_trace, Eigenvalue, MonteCarloSummary, SimSummary, SweepRow,
    SynthReport, TraceMeta,
};
use crate::scenario::{Resolved, Scenario, SectorSpec};

/// Command-line overrides applied on top of the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub eps: Option<f64>,
    pub seed: Option<u64>,
    pub variant: Option<CycleVariant>,
}

impl Overrides {
    pub fn apply(&self, s: &mut Scenario) -> Result<()> {
        if let Some(eps) = self.eps {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(Failure::config(anyhow::anyhow!("--eps must be positive and finite, got {eps}")));
            }
            s.eps = eps;
        }
        if let Some(seed) = self.seed {
            s.simulation.seed = seed;
        }
        if let Some(v) = self.variant {
            s.literal_directed_lmi = v == CycleVariant::Literal;
        }
        Ok(())
    }
}

fn synthesis_options(s: &Scenario) -> SynthesisOptions {
    SynthesisOptions { solver: s.solver_options(), cycle_variant: s.cycle_variant() }
}

fn spectrum_of(r: &Resolved) -> Vec<Eigenvalue> {
    r.graph
        .spectrum()
        .map(|s| s.eigenvalues.iter().map(|z| Eigenvalue { re: z.re, im: z.im }).collect())
        .unwrap_or_default()
}

/// Pass/fail per assumption with a witness for each failure. Returns the
/// lines printed.
pub fn check(scenario: &Scenario) -> Result<Vec<String>> {
    let r = scenario.resolve().or_config()?;
    let mut lines = Vec::new();
    let mut failed = false;
    let mut line = |ok: bool, what: &str, detail: String| {
        failed |= !ok;
        let verdict = if ok { "pass" } else { "FAIL" };
        lines.push(if detail.is_empty() { format!("{verdict}  {what}") } else { format!("{verdict}  {what}: {detail}") });
    };

    let d = &r.dynamics;
    let numerical = |e: lure_consensus::dynamics::DynamicsError| Failure::new(Code::Numerical, e);
    match d.uncontrollable_mode().map_err(numerical)? {
        None => line(true, "A1 (A, B) stabilizable", String::new()),
        Some(mode) => line(false, "A1 (A, B) stabilizable", format!("[A - lambda I, B] loses rank at lambda = {mode}")),
    }
    let right = d.rightmost_eigenvalue().map_err(numerical)?;
    let closed_left = d.check_spectrum_closed_left().map_err(numerical)?;
    line(closed_left, "A2 spectrum of A in the closed left half plane", format!("rightmost eigenvalue {right}"));

    let g = &r.graph;
    let tol = 1e-12 * g.weights().max_abs().max(1.0);
    match (0..g.n_agents()).find(|&i| (g.in_degree(i) - g.out_degree(i)).abs() > tol) {
        None => line(true, "A3 graph balanced", String::new()),
        Some(v) => line(
            false,
            "A3 graph balanced",
            format!("vertex {} has in-degree {} and out-degree {}", v + 1, g.in_degree(v), g.out_degree(v)),
        ),
    }
    match g.spanning_tree_root() {
        Some(root) => line(true, "A3 spanning tree", format!("root vertex {}", root + 1)),
        None => line(false, "A3 spanning tree", "no vertex reaches every other".into()),
    }

    let topology = select_theorem(g);
    match &topology {
        Ok(Theorem::Undirected) => lines.push("topology: undirected, undirected-graph LMI applies".into()),
        Ok(Theorem::DirectedCycle) => lines.push("topology: unweighted directed cycle, cycle LMI applies".into()),
        Err(e) => lines.push(format!("topology: {e}")),
    }
    for l in &lines {
        println!("{l}");
    }
    if failed {
        return Err(Failure::new(Code::AssumptionViolated, anyhow::anyhow!("assumption check failed")));
    }
    if let Err(e) = topology {
        return Err(e.into());
    }
    Ok(lines)
}

/// Runs synthesis and writes `report.json` and `problem.json`. The report is
/// written on failure too, so margins are available either way.
pub fn synth(scenario: &Scenario, out: &Path) -> Result<SynthesisResult<f64>> {
    let r = scenario.resolve().or_config()?;
    std::fs::create_dir_all(out).or_config()?;
    let mut rep = SynthReport::new(scenario, inputs_digest(scenario), &r.sector, spectrum_of(&r));
    if let Ok((problem, _, used)) = build_problem(&r.dynamics, &r.graph, &r.sector, scenario.eps, scenario.cycle_variant()) {
        if let lure_consensus::synthesis::SpectrumUsed::Extremes { lambda2, lambda_n } = used {
            rep.lambda2 = Some(lambda2);
            rep.lambda_n = Some(lambda_n);
        }
        write_json(out, report::PROBLEM, &problem).or_config()?;
    }
    let result = synthesize(&r.dynamics, &r.graph, &r.sector, scenario.eps, &synthesis_options(scenario));
    match &result {
        Ok(res) => rep.record_success(res),
        Err(e) => rep.record_failure(e),
    }
    write_json(out, report::REPORT, &rep).or_config()?;
    let res = result?;
    println!("feasible: K = {:?}", res.k.to_rows());
    println!("certified margin {:.3e} (required <= -{:.1e})", res.certificate.margin, res.tolerance);
    Ok(res)
}

/// Where the simulated gain came from.
pub enum GainSource<'a> {
    /// Synthesize from the scenario.
    Synthesize,
    /// A prior `report.json`, re-certified against the scenario.
    Report(&'a Path),
}

struct Gain {
    k: Matrix64,
    x: Option<Matrix64>,
    source: String,
    recertified_margin: Option<f64>,
}

fn obtain_gain(scenario: &Scenario, r: &Resolved, source: &GainSource, out: &Path) -> Result<Gain> {
    if let GainSource::Report(path) = source {
        let rep = report::read_report(path).or_config()?;
        if rep.inputs_digest != inputs_digest(scenario) {
            eprintln!("warning: {} was produced from different inputs", path.display());
        }
        let decision = rep.decision().map_err(|e| Failure::new(Code::Infeasible, e))?;
        let k = rep.k.clone().ok_or_else(|| Failure::new(Code::Infeasible, anyhow::anyhow!("report has no gain")))?;
        let variant = rep.cycle_variant.unwrap_or(scenario.cycle_variant());
        let (problem, _, _) = build_problem(&r.dynamics, &r.graph, &r.sector, rep.eps, variant)?;
        let tolerance = rep.tolerance.unwrap_or(scenario.solver.tolerance);
        let cert = certify(&problem, &decision, tolerance).map_err(|e| Failure::new(Code::Config, e))?;
        if !cert.passed {
            return Err(Failure::new(
                Code::Infeasible,
                anyhow::anyhow!("solution in {} fails re-certification (margin {:.3e})", path.display(), cert.margin),
            ));
        }
        return Ok(Gain { k, x: Some(decision.x), source: format!("report {}", path.display()), recertified_margin: Some(cert.margin) });
    }
    if let Some(k) = scenario.inline_gain().or_config()? {
        return Ok(Gain { k, x: None, source: "inline".into(), recertified_margin: None });
    }
    let res = synth(scenario, out)?;
    Ok(Gain { k: res.k, x: Some(res.solution.decision.x), source: "synthesized".into(), recertified_margin: None })
}

/// The nonlinearity of the traced run and, for uncertain gains, its gain vector.
fn traced_nonlinearity(scenario: &Scenario, r: &Resolved) -> Result<(Nonlinearity<f64>, Option<Vec<f64>>)> {
    if let Some(sat) = scenario.saturation(r.dynamics.m()).or_config()? {
        return Ok((sat, None));
    }
    let sim = &scenario.simulation;
    let gains = match sim.fixed_gains.first() {
        Some(g) => g.clone(),
        None => draw_gains(&r.sector, r.graph.n_agents(), 1, sim.seed).remove(0),
    };
    Ok((Nonlinearity::static_gain(gains.clone(), r.sector.clone())?, Some(gains)))
}

fn run_trace(scenario: &Scenario, r: &Resolved, k: &Matrix64, x: Option<&Matrix64>) -> Result<(SimulationTrace<f64>, Nonlinearity<f64>, Option<Vec<f64>>)> {
    let (f, gains) = traced_nonlinearity(scenario, r)?;
    let sim = &scenario.simulation;
    let mut trace = simulate(&r.dynamics, &r.graph, k, &f, &r.x0, sim.dt, sim.horizon)?;
    if let Some(x) = x {
        trace.attach_lyapunov(x)?;
    }
    Ok((trace, f, gains))
}

/// Simulates the closed loop and writes `trace.csv`, `trace_meta.json` and
/// `summary.json`.
pub fn simulate_cmd(scenario: &Scenario, source: GainSource, out: &Path) -> Result<SimSummary> {
    let r = scenario.resolve().or_config()?;
    std::fs::create_dir_all(out).or_config()?;
    let gain = obtain_gain(scenario, &r, &source, out)?;
    let sim = &scenario.simulation;
    let (trace, f, gains) = run_trace(scenario, &r, &gain.k, gain.x.as_ref())?;
    let digest = inputs_digest(scenario);

    write_trace(out, &trace).or_config()?;
    let meta = TraceMeta {
        inputs_digest: digest.clone(),
        k: gain.k.clone(),
        eps: scenario.eps,
        delta1: r.sector.delta1().to_vec(),
        delta2: r.sector.delta2().to_vec(),
        nonlinearity: format!("{:?}", f.kind),
        gains,
        seed: sim.seed,
        dt: sim.dt,
        horizon: sim.horizon,
        x0: r.x0.clone(),
        columns: trace.column_names(),
    };
    write_json(out, report::TRACE_META, &meta).or_config()?;

    let monte = match scenario.sector {
        SectorSpec::UncertainGain { .. } => {
            let spec = MonteCarloSpec {
                random_runs: sim.monte_carlo_runs,
                seed: sim.seed,
                fixed: sim.fixed_gains.clone(),
                dt: sim.dt,
                horizon: sim.horizon,
                rel_tol: sim.rel_tol,
            };
            let results = monte_carlo(&r.dynamics, &r.graph, &gain.k, &r.sector, &r.x0, &spec)?;
            let achieved = results.iter().filter(|run| run.outcome.as_ref().is_ok_and(|s| s.consensus.achieved)).count();
            Some(MonteCarloSummary { seed: sim.seed, runs: results.len(), achieved, all_achieved: achieved == results.len(), results })
        }
        SectorSpec::Saturation { .. } => None,
    };

    let (input_min, input_max) = trace.input_range();
    let declared: &SectorBounds<f64> = &f.declared_sector;
    let summary = SimSummary {
        inputs_digest: digest,
        gain_source: gain.source,
        k: gain.k,
        eps: scenario.eps,
        recertified_margin: gain.recertified_margin,
        consensus: check_consensus(&trace, sim.rel_tol),
        input_min,
        input_max,
        max_abs_input: input_min.abs().max(input_max.abs()),
        max_sector_product: trace.max_sector_product(declared),
        sector_violations: trace.sector_violations(declared, SECTOR_TOL),
        lyapunov_decay: lyapunov_decay(&trace, 0.9 * scenario.eps),
        monte_carlo: monte,
    };
    write_json(out, report::SUMMARY, &summary).or_config()?;
    println!(
        "consensus {} (final disagreement {:.3e}, threshold {:.3e}), inputs in [{:.4}, {:.4}]",
        if summary.consensus.achieved { "achieved" } else { "NOT achieved" },
        summary.consensus.final_disagreement,
        summary.consensus.threshold,
        input_min,
        input_max
    );
    if let Some(mc) = &summary.monte_carlo {
        println!("monte carlo: {}/{} runs reached consensus", mc.achieved, mc.runs);
    }
    Ok(summary)
}

/// One synthesis per `ε`, optionally followed by a simulation, written to `sweep.csv`.
pub fn sweep_eps(scenario: &Scenario, eps_list: &[f64], with_simulation: bool, out: &Path) -> Result<Vec<SweepRow>> {
    let eps_list = if eps_list.is_empty() { scenario.eps_sweep.as_slice() } else { eps_list };
    if eps_list.is_empty() {
        return Err(Failure::config(anyhow::anyhow!("no eps values: pass --eps or set eps_sweep in the scenario")));
    }
    if let Some(bad) = eps_list.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
        return Err(Failure::config(anyhow::anyhow!("eps values must be positive and finite, got {bad}")));
    }
    let r = scenario.resolve().or_config()?;
    std::fs::create_dir_all(out).or_config()?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let mut s = scenario.clone();
        s.eps = eps;
        let mut row = SweepRow {
            eps,
            status: String::new(),
            margin: None,
            lower_bound: None,
            k: String::new(),
            solver_iterations: None,
            achieved: None,
            settle_time: None,
        };
        match synthesize(&r.dynamics, &r.graph, &r.sector, eps, &synthesis_options(&s)) {
            Ok(res) => {
                row.status = "Feasible".into();
                row.margin = Some(res.certificate.margin);
                row.k = res.k.as_slice().iter().map(f64::to_string).collect::<Vec<_>>().join(";");
                row.solver_iterations = Some(res.solver_iterations);
                if with_simulation {
                    let (trace, _, _) = run_trace(&s, &r, &res.k, None)?;
                    let c = check_consensus(&trace, s.simulation.rel_tol);
                    row.achieved = Some(c.achieved);
                    row.settle_time = c.settle_time;
                }
            }
            Err(e) => match crate::exit::synthesis_code(&e) {
                Code::Infeasible | Code::Numerical => {
                    row.status = match &e {
                        lure_consensus::synthesis::SynthesisError::Infeasible { status, best_margin, lower_bound, .. } => {
                            row.margin = Some(*best_margin);
                            row.lower_bound = Some(*lower_bound);
                            format!("{status:?}")
                        }
                        other => format!("Error: {other}"),
                    };
                }
                _ => return Err(e.into()),
            },
        }
        println!("eps = {eps}: {}", row.status);
        rows.push(row);
    }
    write_sweep(out, &rows).or_config()?;
    Ok(rows)
}
