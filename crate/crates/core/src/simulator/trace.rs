use serde::Serialize;

use crate::lmi::SectorBounds;
use crate::scalar::Real;

/// Time-indexed record of one closed-loop run. Row `j` holds the values at
/// `times[j] = j·dt`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationTrace<T> {
    pub n: usize,
    pub m: usize,
    pub n_agents: usize,
    pub dt: T,
    pub times: Vec<T>,
    /// Stacked states `x = (x_1, …, x_N)`.
    pub states: Vec<Vec<T>>,
    /// `z = (ℒ ⊗ K) x`.
    pub z_signals: Vec<Vec<T>>,
    /// `u = f(z)`.
    pub inputs: Vec<Vec<T>>,
    pub disagreement: Vec<T>,
    /// `V(x)`, present once a Lyapunov matrix has been attached.
    pub lyapunov: Option<Vec<T>>,
}

impl<T: Real> SimulationTrace<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV header: `t`, `x[agent][state]`, `z[agent][channel]`,
    /// `u[agent][channel]`, `disagreement`, `V` (1-based indices).
    pub fn column_names(&self) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        for i in 1..=self.n_agents {
            cols.extend((1..=self.n).map(|s| format!("x{i}_{s}")));
        }
        for (prefix, width) in [("z", self.m), ("u", self.m)] {
            for i in 1..=self.n_agents {
                cols.extend((1..=width).map(|k| format!("{prefix}{i}_{k}")));
            }
        }
        cols.push("disagreement".into());
        cols.push("V".into());
        cols
    }

    /// One row per instant, matching [`Self::column_names`]. `V` is `NaN`
    /// when no Lyapunov matrix was attached.
    pub fn rows(&self) -> impl Iterator<Item = Vec<T>> + '_ {
        (0..self.len()).map(move |j| {
            let mut row = Vec::with_capacity(3 + self.states[j].len() + 2 * self.inputs[j].len());
            row.push(self.times[j]);
            row.extend_from_slice(&self.states[j]);
            row.extend_from_slice(&self.z_signals[j]);
            row.extend_from_slice(&self.inputs[j]);
            row.push(self.disagreement[j]);
            row.push(self.lyapunov.as_ref().map_or(T::nan(), |v| v[j]));
            row
        })
    }

    pub fn input_range(&self) -> (T, T) {
        self.inputs.iter().flatten().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &u| (lo.min(u), hi.max(u)))
    }

    /// Largest `(u − δ₁z)(u − δ₂z)` over every recorded sample.
    pub fn max_sector_product(&self, sector: &SectorBounds<T>) -> T {
        let m = sector.m();
        let mut worst = T::neg_infinity();
        for (z, u) in self.z_signals.iter().zip(&self.inputs) {
            for (idx, (&zi, &ui)) in z.iter().zip(u).enumerate() {
                worst = worst.max(sector.sector_product(idx % m, zi, ui));
            }
        }
        worst
    }

    /// Number of recorded samples with sector product above `tol`.
    pub fn sector_violations(&self, sector: &SectorBounds<T>, tol: T) -> usize {
        let m = sector.m();
        self.z_signals
            .iter()
            .zip(&self.inputs)
            .map(|(z, u)| z.iter().zip(u).enumerate().filter(|(idx, (&zi, &ui))| !(sector.sector_product(idx % m, zi, ui) <= tol)).count())
            .sum()
    }
}
