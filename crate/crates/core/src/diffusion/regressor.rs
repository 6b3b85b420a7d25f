use serde::{Deserialize, Serialize};

use super::plugin::PluginClient;
use crate::error::{Error, Result};
use crate::image::{BinaryMask, Image2D};

/// What a regressor is evaluated on during guided sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressorInput {
    /// The noisy sample `x_l`; suits regressors trained across noise levels.
    #[default]
    NoisyLatent,
    /// The denoiser's clean estimate `(x_l - √(1-ᾱ)ε) / √ᾱ`; the returned
    /// gradient is mapped back to `x_l` by the factor `1/√ᾱ`.
    PredictedClean,
}

/// Tumor-size predictor `R(x, l)` returning its value and `∇_x R`.
pub trait Regressor: Send {
    fn evaluate(&mut self, x: &Image2D, l: usize) -> Result<(f64, Image2D)>;

    fn input(&self) -> RegressorInput {
        RegressorInput::NoisyLatent
    }
}

/// Differentiable tumor fraction: mean of `σ((x - τ)/T)` over the brain mask.
#[derive(Debug, Clone)]
pub struct SoftAreaRegressor {
    pub tau: f64,
    pub softness: f64,
    pub brain_mask: BinaryMask,
    pub input: RegressorInput,
}

impl SoftAreaRegressor {
    pub fn new(tau: f64, softness: f64, brain_mask: BinaryMask) -> Result<Self> {
        let reg = Self { tau, softness, brain_mask, input: RegressorInput::PredictedClean };
        reg.validate()?;
        Ok(reg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.softness.is_finite() && self.softness > 0.0) {
            return Err(Error::invalid("softness T must be positive"));
        }
        if !self.tau.is_finite() {
            return Err(Error::invalid("threshold tau must be finite"));
        }
        if self.brain_mask.is_empty() {
            return Err(Error::invalid("brain mask is empty"));
        }
        Ok(())
    }

    /// Hard counterpart: brain pixels strictly above `tau`.
    pub fn segment(&self, x: &Image2D) -> Result<BinaryMask> {
        BinaryMask::from_threshold(x, self.tau).intersection(&self.brain_mask)
    }
}

impl Regressor for SoftAreaRegressor {
    fn evaluate(&mut self, x: &Image2D, _l: usize) -> Result<(f64, Image2D)> {
        soft_tumor_fraction(x, self)
    }

    fn input(&self) -> RegressorInput {
        self.input
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Value `(1/|B|) Σ_B σ((x_p - τ)/T)` and gradient `σ'((x_p - τ)/T) / (T|B|)`
/// inside the brain mask `B`, zero outside.
pub fn soft_tumor_fraction(x: &Image2D, reg: &SoftAreaRegressor) -> Result<(f64, Image2D)> {
    reg.validate()?;
    if !reg.brain_mask.matches_image(x) {
        return Err(Error::invalid("brain mask shape does not match image"));
    }
    let n = reg.brain_mask.count() as f64;
    let mut value = 0.0;
    let grad: Vec<f64> = x
        .pixels()
        .iter()
        .zip(reg.brain_mask.bits())
        .map(|(&p, &inside)| {
            if !inside {
                return 0.0;
            }
            let s = logistic((p - reg.tau) / reg.softness);
            value += s;
            s * (1.0 - s) / (reg.softness * n)
        })
        .collect();
    Ok((value / n, x.with_pixels(grad)?))
}

/// Serializable regressor choice; the brain mask is supplied at build time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum RegressorSpec {
    SoftArea {
        tau: f64,
        softness: f64,
        #[serde(default = "default_soft_input")]
        input: RegressorInput,
    },
    Plugin { command: String },
}

fn default_soft_input() -> RegressorInput {
    RegressorInput::PredictedClean
}

impl RegressorSpec {
    /// Parses `soft-area` or `plugin:CMD`.
    pub fn parse(text: &str, tau: f64, softness: f64) -> Result<Self> {
        match text {
            "soft-area" => Ok(Self::SoftArea { tau, softness, input: RegressorInput::PredictedClean }),
            other => match other.strip_prefix("plugin:") {
                Some(cmd) if !cmd.trim().is_empty() => Ok(Self::Plugin { command: cmd.to_string() }),
                _ => Err(Error::invalid(format!("unknown regressor {other:?}"))),
            },
        }
    }

    pub fn build(&self, brain_mask: &BinaryMask) -> Result<Box<dyn Regressor>> {
        Ok(match self {
            Self::SoftArea { tau, softness, input } => {
                let reg = SoftAreaRegressor {
                    tau: *tau,
                    softness: *softness,
                    brain_mask: brain_mask.clone(),
                    input: *input,
                };
                reg.validate()?;
                Box::new(reg)
            }
            Self::Plugin { command } => Box::new(PluginClient::spawn(command)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn disk_mask(n: usize) -> BinaryMask {
        let c = n as f64 / 2.0;
        BinaryMask::from_fn(n, n, |x, y| (x as f64 - c).powi(2) + (y as f64 - c).powi(2) < c * c)
    }

    #[test]
    fn deep_below_threshold_is_near_zero() {
        let reg = SoftAreaRegressor::new(0.6, 0.05, disk_mask(8)).unwrap();
        let x = Image2D::filled(8, 8, 1.0, 0.6 - 10.0 * 0.05).unwrap();
        let (v, g) = soft_tumor_fraction(&x, &reg).unwrap();
        assert!(v < 1e-4);
        assert!(g.pixels().iter().all(|&p| p.abs() < 1e-4));
    }

    #[test]
    fn at_threshold_is_one_half() {
        let reg = SoftAreaRegressor::new(0.6, 0.05, disk_mask(8)).unwrap();
        let x = Image2D::filled(8, 8, 1.0, 0.6).unwrap();
        assert_eq!(soft_tumor_fraction(&x, &reg).unwrap().0, 0.5);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mask = disk_mask(10);
        let reg = SoftAreaRegressor::new(0.5, 0.1, mask.clone()).unwrap();
        let mut rng = crate::seed::rng_from_seed(17);
        let x = Image2D::from_fn(10, 10, 1.0, |_, _| rng.random_range(0.2..0.8)).unwrap();
        let (_, grad) = soft_tumor_fraction(&x, &reg).unwrap();
        let h = 1e-5;
        for i in 0..x.len() {
            let mut plus = x.clone();
            plus.pixels_mut()[i] += h;
            let mut minus = x.clone();
            minus.pixels_mut()[i] -= h;
            let fd = (soft_tumor_fraction(&plus, &reg).unwrap().0
                - soft_tumor_fraction(&minus, &reg).unwrap().0)
                / (2.0 * h);
            let g = grad.pixels()[i];
            if mask.bits()[i] {
                assert!((g - fd).abs() <= 1e-4 * fd.abs(), "pixel {i}: {g} vs {fd}");
            } else {
                assert_eq!(g, 0.0);
                assert!(fd.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_mask_is_invalid() {
        let x = Image2D::filled(4, 4, 1.0, 0.0).unwrap();
        let reg = SoftAreaRegressor {
            tau: 0.5,
            softness: 0.1,
            brain_mask: BinaryMask::empty(4, 4),
            input: RegressorInput::NoisyLatent,
        };
        assert!(matches!(soft_tumor_fraction(&x, &reg), Err(Error::InvalidInput(_))));
        assert!(SoftAreaRegressor::new(0.5, 0.0, disk_mask(4)).is_err());
    }
}
