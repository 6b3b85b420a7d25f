use super::denoiser::Denoiser;
use super::guidance::{guided_epsilon, regressor_scale, GuidanceConfig};
use super::regressor::{Regressor, RegressorInput};
use super::sampler::{ddim_step, forward_noise};
use super::schedule::NoiseSchedule;
use crate::error::Result;
use crate::image::Image2D;
use crate::seed::rng_from_seed;

/// Output of a guided generation with per-step regressor readings.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationTrace {
    pub image: Image2D,
    /// Regressor output at steps `nl, nl-1, ..., 1`.
    pub regressor_values: Vec<f64>,
    /// Guidance scale `s_R` applied at the same steps.
    pub scales: Vec<f64>,
}

/// Noises `reference` for `nl` forward steps, then runs guided deterministic
/// DDIM back to step 0. Bitwise reproducible for fixed inputs and seed.
pub fn generate(
    reference: &Image2D,
    nl: usize,
    denoiser: &mut dyn Denoiser,
    regressor: &mut dyn Regressor,
    guidance: &GuidanceConfig,
    sched: &NoiseSchedule,
    seed: u64,
) -> Result<Image2D> {
    generate_traced(reference, nl, denoiser, regressor, guidance, sched, seed).map(|t| t.image)
}

pub fn generate_traced(
    reference: &Image2D,
    nl: usize,
    denoiser: &mut dyn Denoiser,
    regressor: &mut dyn Regressor,
    guidance: &GuidanceConfig,
    sched: &NoiseSchedule,
    seed: u64,
) -> Result<GenerationTrace> {
    sched.check_step(nl)?;
    guidance.validate()?;
    let mut rng = rng_from_seed(seed);
    let (mut x, _) = forward_noise(reference, nl, sched, &mut rng)?;
    let mut regressor_values = Vec::with_capacity(nl);
    let mut scales = Vec::with_capacity(nl);

    for l in (1..=nl).rev() {
        let eps = denoiser.predict_eps(&x, l, sched)?;
        let a = sched.alpha_bar(l);
        let (value, grad) = match regressor.input() {
            RegressorInput::NoisyLatent => regressor.evaluate(&x, l)?,
            RegressorInput::PredictedClean => {
                let (sa, sb) = (a.sqrt(), (1.0 - a).sqrt());
                let x0 = x.zip_map(&eps, |xi, ei| (xi - sb * ei) / sa)?;
                let (v, g) = regressor.evaluate(&x0, l)?;
                (v, g.map(|gi| gi / sa))
            }
        };
        let s_r = regressor_scale(guidance, value);
        let eps_bar = guided_epsilon(&eps, &grad, s_r, a)?;
        x = ddim_step(&x, l, &eps_bar, sched, 0.0, None)?;
        regressor_values.push(value);
        scales.push(s_r);
    }
    Ok(GenerationTrace { image: x, regressor_values, scales })
}
