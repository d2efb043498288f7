//! Consensus controller synthesis for networks of Lur'e agents.

pub mod dynamics;
pub mod graph;
pub mod linalg;
pub mod lmi;
pub mod scalar;
pub mod sdp;
pub mod simulator;
pub mod synthesis;

pub use scalar::Real;

pub type Matrix64 = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type Graph64 = graph::Graph<f64>;
pub type Graph32 = graph::Graph<f32>;
pub type AgentDynamics64 = dynamics::AgentDynamics<f64>;
