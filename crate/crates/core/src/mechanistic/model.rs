use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which rate drives the post-RT dying compartment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayForm {
    /// `λ'(t) = -λ_decay · tanh((t - t_rt - δ) · slope)`, with its own decay magnitude.
    #[default]
    Gated,
    /// `λ'(t) = -λ · tanh((t - t_rt - δ) / slope)`: decay magnitude tied to the growth
    /// rate and `slope` acting as a time scale. `lambda_decay` is ignored.
    Coupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthParams {
    /// Area at t = 0, mm².
    pub a0: f64,
    /// Net growth rate, 1/day.
    pub lambda: f64,
    /// Clonogenically surviving fraction at RT onset.
    pub survival: f64,
    /// Decay magnitude of the dying compartment, 1/day.
    pub lambda_decay: f64,
    /// Delay before the dying compartment starts shrinking, days.
    pub delta: f64,
    /// Steepness of the growth-to-decay transition.
    pub slope: f64,
    pub t_rt_start: f64,
    #[serde(default)]
    pub decay_form: DecayForm,
}

impl GrowthParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.a0,
            self.lambda,
            self.survival,
            self.lambda_decay,
            self.delta,
            self.slope,
            self.t_rt_start,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("growth parameters must be finite"));
        }
        if self.a0 <= 0.0 {
            return Err(Error::invalid("A0 must be positive"));
        }
        if !(0.0..=1.0).contains(&self.survival) {
            return Err(Error::invalid("survival fraction must lie in [0, 1]"));
        }
        if self.slope <= 0.0 {
            return Err(Error::invalid("slope must be positive"));
        }
        if self.lambda_decay < 0.0 || self.delta < 0.0 || self.t_rt_start < 0.0 {
            return Err(Error::invalid("lambda_decay, delta and t_rt_start must be non-negative"));
        }
        Ok(())
    }

    /// Time-dependent rate of the dying compartment (only meaningful after RT onset).
    pub fn decay_rate(&self, t: f64) -> f64 {
        let shifted = t - self.t_rt_start - self.delta;
        match self.decay_form {
            DecayForm::Gated => -self.lambda_decay * (shifted * self.slope).tanh(),
            DecayForm::Coupled => -self.lambda * (shifted / self.slope).tanh(),
        }
    }

    /// Surviving and dying compartment areas; before RT onset everything is surviving.
    pub fn compartments(&self, t: f64) -> (f64, f64) {
        if t < self.t_rt_start {
            return (self.a0 * (self.lambda * t).exp(), 0.0);
        }
        let at_onset = self.a0 * (self.lambda * self.t_rt_start).exp();
        let since = t - self.t_rt_start;
        let surviving = self.survival * at_onset * (self.lambda * since).exp();
        let dying = (1.0 - self.survival) * at_onset * (self.decay_rate(t) * since).exp();
        (surviving, dying)
    }
}

/// Total tumor area (mm²) at time `t` in days.
pub fn tumor_area(t: f64, p: &GrowthParams) -> f64 {
    let (surviving, dying) = p.compartments(t);
    surviving + dying
}
