use serde::{Deserialize, Serialize};

use super::plugin::PluginClient;
use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};
use crate::image::Image2D;

/// Noise predictor `ε(x_l, l)`.
pub trait Denoiser: Send {
    fn predict_eps(&mut self, x_l: &Image2D, l: usize, sched: &NoiseSchedule) -> Result<Image2D>;
}

/// Exact noise predictor when clean data are `N(mu, s0² I)`:
///
/// `ε* = √(1-ᾱ) (x_l - √ᾱ μ) / (ᾱ s0² + 1 - ᾱ)`.
///
/// With `s0 = 0` this is the delta-centred predictor `(x_l - √ᾱ μ) / √(1-ᾱ)`.
pub fn gaussian_optimal_eps(
    x_l: &Image2D,
    l: usize,
    sched: &NoiseSchedule,
    mu: &Image2D,
    s0: f64,
) -> Result<Image2D> {
    sched.check_step(l)?;
    if !(s0.is_finite() && s0 >= 0.0) {
        return Err(Error::invalid("s0 must be non-negative"));
    }
    let a = sched.alpha_bar(l);
    let (sa, sb) = (a.sqrt(), (1.0 - a).sqrt());
    let denom = a * s0 * s0 + 1.0 - a;
    x_l.zip_map(mu, |x, m| sb * (x - sa * m) / denom)
}

#[derive(Debug, Clone)]
pub struct GaussianDenoiser {
    pub mu: Image2D,
    pub s0: f64,
}

impl Denoiser for GaussianDenoiser {
    fn predict_eps(&mut self, x_l: &Image2D, l: usize, sched: &NoiseSchedule) -> Result<Image2D> {
        gaussian_optimal_eps(x_l, l, sched, &self.mu, self.s0)
    }
}

/// Serializable choice of noise predictor; analytic variants centre on the
/// image passed to [`DenoiserSpec::build`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum DenoiserSpec {
    AnalyticGaussian { s0: f64 },
    AnalyticDelta,
    Plugin { command: String },
}

impl DenoiserSpec {
    /// Parses `analytic-gaussian`, `analytic-delta` or `plugin:CMD`.
    pub fn parse(text: &str, s0: f64) -> Result<Self> {
        match text {
            "analytic-gaussian" => Ok(Self::AnalyticGaussian { s0 }),
            "analytic-delta" => Ok(Self::AnalyticDelta),
            other => match other.strip_prefix("plugin:") {
                Some(cmd) if !cmd.trim().is_empty() => Ok(Self::Plugin { command: cmd.to_string() }),
                _ => Err(Error::invalid(format!("unknown denoiser {other:?}"))),
            },
        }
    }

    pub fn build(&self, center: &Image2D) -> Result<Box<dyn Denoiser>> {
        Ok(match self {
            Self::AnalyticGaussian { s0 } => {
                if !(s0.is_finite() && *s0 >= 0.0) {
                    return Err(Error::invalid("s0 must be non-negative"));
                }
                Box::new(GaussianDenoiser { mu: center.clone(), s0: *s0 })
            }
            Self::AnalyticDelta => Box::new(GaussianDenoiser { mu: center.clone(), s0: 0.0 }),
            Self::Plugin { command } => Box::new(PluginClient::spawn(command)?),
        })
    }
}
