use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cumulative signal fractions `ᾱ_1..ᾱ_L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    /// Checks that the sequence lies in (0, 1) and strictly decreases.
    pub fn from_alpha_bar(alpha_bar: Vec<f64>) -> Result<Self> {
        if alpha_bar.is_empty() {
            return Err(Error::invalid("schedule needs at least one step"));
        }
        if alpha_bar.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(Error::invalid("alpha_bar entries must lie in (0, 1)"));
        }
        if alpha_bar.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("alpha_bar must be strictly decreasing"));
        }
        Ok(Self { alpha_bar })
    }

    /// Number of diffusion steps `L`.
    pub fn len(&self) -> usize {
        self.alpha_bar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha_bar.is_empty()
    }

    /// `ᾱ_l` for `l ∈ 0..=L`; `ᾱ_0 = 1`.
    pub fn alpha_bar(&self, l: usize) -> f64 {
        if l == 0 {
            1.0
        } else {
            self.alpha_bar[l - 1]
        }
    }

    pub fn check_step(&self, l: usize) -> Result<()> {
        if l == 0 || l > self.len() {
            return Err(Error::invalid(format!("step {l} outside 1..={}", self.len())));
        }
        Ok(())
    }
}

/// Linear-β schedule: `β_k` evenly spaced from `beta_start` to `beta_end`,
/// `ᾱ_l = Π_{k≤l} (1 - β_k)`.
pub fn make_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(Error::invalid("schedule needs at least one step"));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::invalid(format!(
            "need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )));
    }
    let mut alpha_bar = Vec::with_capacity(steps);
    let mut acc = 1.0;
    for k in 0..steps {
        let beta = if steps == 1 {
            beta_start
        } else {
            beta_start + (beta_end - beta_start) * k as f64 / (steps - 1) as f64
        };
        acc *= 1.0 - beta;
        alpha_bar.push(acc);
    }
    NoiseSchedule::from_alpha_bar(alpha_bar)
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        make_schedule(1000, 1e-4, 0.02).expect("default schedule is valid")
    }
}
