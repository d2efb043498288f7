#![allow(dead_code)]

use lure_consensus::dynamics::{realize_room_model, AgentDynamics};
use lure_consensus::graph::Graph;
use lure_consensus::lmi::SectorBounds;
use lure_consensus::synthesis::{synthesize, SynthesisOptions, SynthesisResult};
use lure_consensus::{Graph64, Matrix64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn room() -> AgentDynamics<f64> {
    realize_room_model(10.0, 50.0).unwrap()
}

/// `2 ↔ 1 ↔ 3`: agent 1 is the hub.
pub fn hub_path() -> Graph64 {
    Graph::from_weights(Matrix64::from_rows(&[[0.0, 1.0, 1.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]), false).unwrap()
}

pub fn uncertain() -> SectorBounds<f64> {
    SectorBounds::uniform(1, 0.7, 1.2).unwrap()
}

pub fn x0() -> Vec<f64> {
    vec![0.0, 0.0, 5.0, 0.0, -3.0, 0.0]
}

pub fn uncertain_path_synthesis() -> SynthesisResult<f64> {
    synthesize(&room(), &hub_path(), &uncertain(), 0.1, &SynthesisOptions::default()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in `[-1, 1)`.
pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix64 {
    Matrix64::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

/// `R diag(λ) R⁻¹` with `R = I + ½·random`. Stable instances draw every
/// `λ ∈ [−2, −0.2]`; unstable ones replace one of them by `λ ∈ [0.1, 1]`.
pub fn lyapunov_instance(rng: &mut ChaCha8Rng, n: usize, stable: bool) -> Matrix64 {
    let mut lambda: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..-0.2)).collect();
    if !stable {
        let k = rng.gen_range(0..n);
        lambda[k] = rng.gen_range(0.1..1.0);
    }
    loop {
        let r = &Matrix64::identity(n) + &random_matrix(rng, n, n).scale(0.5);
        if let Ok(ri) = r.inverse() {
            return &(&r * &Matrix64::diag(&lambda)) * &ri;
        }
    }
}
