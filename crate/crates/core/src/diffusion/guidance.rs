use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image2D;

/// Guidance strength `s_R = s_ct · s_dyn`, where `s_dyn` is the clamped signed
/// gap between the target and the current regressor output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidanceConfig {
    pub s_ct: f64,
    pub dyn_clamp: f64,
    /// Target tumor fraction of the brain area.
    pub target: f64,
}

impl GuidanceConfig {
    pub fn new(s_ct: f64, target: f64) -> Result<Self> {
        let cfg = Self { s_ct, dyn_clamp: 1.0, target };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s_ct.is_finite() && self.s_ct >= 0.0) {
            return Err(Error::invalid("s_ct must be non-negative"));
        }
        if !(self.dyn_clamp.is_finite() && self.dyn_clamp > 0.0) {
            return Err(Error::invalid("dyn_clamp must be positive"));
        }
        if !(0.0..1.0).contains(&self.target) {
            return Err(Error::invalid("target fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Signed guidance scale for the current regressor output. Vanishes at the
/// target and reverses sign on overshoot.
pub fn regressor_scale(cfg: &GuidanceConfig, current: f64) -> f64 {
    let s_dyn = (cfg.target - current).clamp(-cfg.dyn_clamp, cfg.dyn_clamp);
    cfg.s_ct * s_dyn
}

/// `ε̄ = ε - s_R · √(1-ᾱ_l) · ∇R`.
pub fn guided_epsilon(eps: &Image2D, grad: &Image2D, s_r: f64, alpha_bar_l: f64) -> Result<Image2D> {
    let k = s_r * (1.0 - alpha_bar_l).sqrt();
    eps.zip_map(grad, |e, g| e - k * g)
}
