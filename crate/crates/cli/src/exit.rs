//! Process exit codes. Every failure is mapped to exactly one category.

use std::fmt;

use lure_consensus::dynamics::DynamicsError;
use lure_consensus::graph::GraphError;
use lure_consensus::lmi::LmiError;
use lure_consensus::simulator::SimError;
use lure_consensus::synthesis::SynthesisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Code {
    Ok = 0,
    /// Unreadable or invalid scenario, bad flags, I/O failure.
    Config = 1,
    /// LMI infeasible, iteration limit reached, or certification failed.
    Infeasible = 2,
    UnsupportedTopology = 3,
    AssumptionViolated = 4,
    /// Numerical breakdown, ill-conditioned `X`, divergence or a runtime
    /// sector violation.
    Numerical = 5,
}

impl Code {
    pub fn as_i32(self) -> i32 {
        self as i32
    }
}

#[derive(Debug)]
pub struct Failure {
    pub code: Code,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(code: Code, error: impl Into<anyhow::Error>) -> Self {
        Self { code, error: error.into() }
    }

    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        Self::new(Code::Config, error)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type Result<T> = std::result::Result<T, Failure>;

/// Tags any error as a configuration or I/O failure.
pub trait OrConfig<T> {
    fn or_config(self) -> Result<T>;
}

impl<T, E: Into<anyhow::Error>> OrConfig<T> for std::result::Result<T, E> {
    fn or_config(self) -> Result<T> {
        self.map_err(Failure::config)
    }
}

fn graph_code(e: &GraphError) -> Code {
    match e {
        GraphError::Linalg(_) => Code::Numerical,
        _ => Code::Config,
    }
}

fn dynamics_code(e: &DynamicsError) -> Code {
    match e {
        DynamicsError::Linalg(_) => Code::Numerical,
        _ => Code::Config,
    }
}

fn lmi_code(e: &LmiError) -> Code {
    match e {
        LmiError::Linalg(_) => Code::Numerical,
        _ => Code::Config,
    }
}

pub fn synthesis_code(e: &SynthesisError) -> Code {
    match e {
        SynthesisError::AssumptionViolated { .. } => Code::AssumptionViolated,
        SynthesisError::UnsupportedTopology(_) => Code::UnsupportedTopology,
        SynthesisError::Infeasible { .. } | SynthesisError::CertificationFailed { .. } => Code::Infeasible,
        SynthesisError::IllConditioned { .. } | SynthesisError::Sdp(_) => Code::Numerical,
        SynthesisError::Graph(g) => graph_code(g),
        SynthesisError::Dynamics(d) => dynamics_code(d),
        SynthesisError::Lmi(l) => lmi_code(l),
    }
}

pub fn sim_code(e: &SimError) -> Code {
    match e {
        SimError::DimensionMismatch(_) | SimError::BadNonlinearity(_) | SimError::BadTimeGrid(_) => Code::Config,
        SimError::SectorViolation { .. } | SimError::Divergence { .. } | SimError::IllConditioned { .. } => Code::Numerical,
    }
}

impl From<SynthesisError> for Failure {
    fn from(e: SynthesisError) -> Self {
        Failure::new(synthesis_code(&e), e)
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::new(sim_code(&e), e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lure_consensus::sdp::{SdpError, SolverStatus};
    use lure_consensus::synthesis::Assumption;

    #[test]
    fn categories_map_to_documented_codes() {
        let infeasible = SynthesisError::Infeasible {
            status: SolverStatus::Infeasible,
            best_margin: 1.0,
            lower_bound: 0.5,
            worst_block: Some(0),
        };
        assert_eq!(synthesis_code(&infeasible), Code::Infeasible);
        assert_eq!(synthesis_code(&SynthesisError::UnsupportedTopology("x".into())), Code::UnsupportedTopology);
        let a3 = SynthesisError::AssumptionViolated { assumption: Assumption::A3, detail: String::new() };
        assert_eq!(synthesis_code(&a3), Code::AssumptionViolated);
        assert_eq!(synthesis_code(&SynthesisError::Sdp(SdpError::NumericalBreakdown("x".into()))), Code::Numerical);
        assert_eq!(sim_code(&SimError::Divergence { time: 1.0 }), Code::Numerical);
        assert_eq!(sim_code(&SimError::BadTimeGrid("x".into())), Code::Config);
        assert_eq!(Code::Numerical.as_i32(), 5);
    }
}
