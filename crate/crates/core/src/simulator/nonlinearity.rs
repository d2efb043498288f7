use std::fmt;
use std::sync::Arc;

use crate::lmi::SectorBounds;
use crate::scalar::Real;

use super::SimError;

/// Absolute slack allowed on `(u − δ₁z)(u − δ₂z) ≤ 0`.
pub const SECTOR_TOL: f64 = 1e-12;

/// Scalar map `(agent, channel, z) ↦ u`.
pub type ChannelMap<T> = Arc<dyn Fn(usize, usize, T) -> T + Send + Sync>;

#[derive(Clone)]
pub enum NonlinearityKind<T> {
    /// Clamp channel `k` to `[lo_k, hi_k]`.
    Saturation { lo: Vec<T>, hi: Vec<T> },
    /// `u_{i,k} = gains[i·m + k] · z_{i,k}`.
    StaticGain { gains: Vec<T> },
    Custom(ChannelMap<T>),
}

impl<T: fmt::Debug> fmt::Debug for NonlinearityKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Saturation { lo, hi } => f.debug_struct("Saturation").field("lo", lo).field("hi", hi).finish(),
            Self::StaticGain { gains } => f.debug_struct("StaticGain").field("gains", gains).finish(),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Channel-wise input nonlinearity together with the sector it is declared to satisfy.
#[derive(Debug, Clone)]
pub struct Nonlinearity<T> {
    pub kind: NonlinearityKind<T>,
    pub declared_sector: SectorBounds<T>,
}

impl<T: Real> Nonlinearity<T> {
    /// Saturation with `lo_k ≤ 0 ≤ hi_k`, declared in the sector `[0, 1]`.
    pub fn saturation(lo: Vec<T>, hi: Vec<T>) -> Result<Self, SimError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(SimError::BadNonlinearity(format!("{} lower and {} upper bounds", lo.len(), hi.len())));
        }
        if let Some(k) = (0..lo.len()).find(|&k| !(lo[k] <= T::zero() && T::zero() <= hi[k])) {
            return Err(SimError::BadNonlinearity(format!("channel {k}: need lo <= 0 <= hi, got [{}, {}]", lo[k], hi[k])));
        }
        let m = lo.len();
        Ok(Self { kind: NonlinearityKind::Saturation { lo, hi }, declared_sector: SectorBounds::saturation(m) })
    }

    /// Per-agent, per-channel gains (agent-major, `N·m` entries).
    pub fn static_gain(gains: Vec<T>, declared_sector: SectorBounds<T>) -> Result<Self, SimError> {
        if gains.is_empty() || gains.len() % declared_sector.m() != 0 {
            return Err(SimError::BadNonlinearity(format!(
                "{} gains do not split into channels of width {}",
                gains.len(),
                declared_sector.m()
            )));
        }
        Ok(Self { kind: NonlinearityKind::StaticGain { gains }, declared_sector })
    }

    pub fn custom(map: ChannelMap<T>, declared_sector: SectorBounds<T>) -> Self {
        Self { kind: NonlinearityKind::Custom(map), declared_sector }
    }

    pub fn m(&self) -> usize {
        self.declared_sector.m()
    }

    fn apply(&self, agent: usize, channel: usize, z: T) -> T {
        let m = self.m();
        match &self.kind {
            NonlinearityKind::Saturation { lo, hi } => z.max(lo[channel]).min(hi[channel]),
            NonlinearityKind::StaticGain { gains } => gains[(agent * m + channel) % gains.len()] * z,
            NonlinearityKind::Custom(f) => f(agent, channel, z),
        }
    }

    /// Applies the map channel-wise to `z = (z_1, …, z_N)` and checks every
    /// sample against the declared sector.
    pub fn evaluate(&self, z: &[T]) -> Result<Vec<T>, SimError> {
        let mut u = vec![T::zero(); z.len()];
        self.evaluate_into(z, &mut u)?;
        Ok(u)
    }

    pub(crate) fn evaluate_into(&self, z: &[T], u: &mut [T]) -> Result<(), SimError> {
        let m = self.m();
        if z.len() % m != 0 {
            return Err(SimError::DimensionMismatch(format!("z has {} entries, not a multiple of m = {m}", z.len())));
        }
        if let NonlinearityKind::StaticGain { gains } = &self.kind {
            if gains.len() != m && gains.len() != z.len() {
                return Err(SimError::DimensionMismatch(format!("{} gains for {} channels", gains.len(), z.len())));
            }
        }
        let tol = T::lit(SECTOR_TOL);
        for (idx, (&zi, ui)) in z.iter().zip(u.iter_mut()).enumerate() {
            let (agent, channel) = (idx / m, idx % m);
            let v = self.apply(agent, channel, zi);
            let product = self.declared_sector.sector_product(channel, zi, v);
            if !(product <= tol) {
                return Err(SimError::SectorViolation {
                    agent,
                    channel,
                    z: zi.as_f64(),
                    u: v.as_f64(),
                    product: product.as_f64(),
                });
            }
            *ui = v;
        }
        Ok(())
    }
}

/// Free-function form of [`Nonlinearity::evaluate`].
pub fn evaluate_nonlinearity<T: Real>(f: &Nonlinearity<T>, z: &[T]) -> Result<Vec<T>, SimError> {
    f.evaluate(z)
}
