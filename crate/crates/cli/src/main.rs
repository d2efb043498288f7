use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lure_consensus::lmi::CycleVariant;
use lure_consensus_cli::commands::{self, GainSource, Overrides};
use lure_consensus_cli::exit::{Code, Failure, OrConfig};
use lure_consensus_cli::scenario::Scenario;

/// Robust consensus gain synthesis and closed-loop simulation for networks of
/// Lur'e agents.
///
/// Exit codes: 0 success, 1 configuration or I/O error, 2 LMI infeasible or
/// not solved, 3 unsupported topology, 4 assumption violated, 5 numerical
/// failure or divergence.
#[derive(Debug, Parser)]
#[command(name = "lurecons", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check assumptions A1-A3 and report which LMI applies.
    Check(Common),
    /// Synthesize K and write report.json and problem.json.
    Synth(Common),
    /// Simulate the closed loop and write trace.csv, trace_meta.json and summary.json.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Take K (and X) from a prior synth report instead of synthesizing.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Synthesize for several values of eps and write sweep.csv.
    SweepEps {
        #[command(flatten)]
        common: Common,
        /// Also simulate every feasible row and record the settle time.
        #[arg(long)]
        simulate: bool,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the Monte-Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Use the literal directed-cycle constants (symmetrized block).
    #[arg(long, conflicts_with = "derived")]
    literal: bool,
    /// Use the Schur-consistent constants for the directed-cycle LMI.
    #[arg(long)]
    derived: bool,
    /// Decay rate. Repeat on sweep-eps for several values.
    #[arg(long, allow_negative_numbers = true)]
    eps: Vec<f64>,
}

impl Common {
    fn load(&self, single_eps: bool) -> Result<Scenario, Failure> {
        if single_eps && self.eps.len() > 1 {
            return Err(Failure::config(anyhow::anyhow!("--eps may be given once for this command")));
        }
        let (mut s, _) = Scenario::load(&self.scenario).or_config()?;
        let variant = match (self.literal, self.derived) {
            (true, _) => Some(CycleVariant::Literal),
            (_, true) => Some(CycleVariant::Derived),
            _ => None,
        };
        let eps = if single_eps { self.eps.first().copied() } else { None };
        Overrides { eps, seed: self.seed, variant }.apply(&mut s)?;
        Ok(s)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Check(c) => commands::check(&c.load(true)?).map(drop),
        Command::Synth(c) => commands::synth(&c.load(true)?, &c.out).map(drop),
        Command::Simulate { common, report } => {
            let s = common.load(true)?;
            let source = report.as_deref().map_or(GainSource::Synthesize, GainSource::Report);
            commands::simulate_cmd(&s, source, &common.out).map(drop)
        }
        Command::SweepEps { common, simulate } => {
            let s = common.load(false)?;
            commands::sweep_eps(&s, &common.eps, simulate, &common.out).map(drop)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // clap would exit with 2, which is reserved for infeasibility
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Code::Config.as_i32() as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(Code::Ok.as_i32() as u8),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code.as_i32() as u8)
        }
    }
}
