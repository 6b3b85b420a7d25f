//! Forward noising, the DDIM reverse update and regressor-gradient guidance.
//!
//! Steps are 1-based: `l ∈ 1..=L`, with `ᾱ_0 = 1` by convention. All image
//! arithmetic is per pixel in `f64`.

mod denoiser;
mod generate;
mod guidance;
pub mod plugin;
mod regressor;
mod sampler;
mod schedule;

pub use denoiser::{gaussian_optimal_eps, Denoiser, DenoiserSpec, GaussianDenoiser};
pub use generate::{generate, generate_traced, GenerationTrace};
pub use guidance::{guided_epsilon, regressor_scale, GuidanceConfig};
pub use regressor::{
    soft_tumor_fraction, Regressor, RegressorInput, RegressorSpec, SoftAreaRegressor,
};
pub use sampler::{ddim_step, forward_noise, forward_noise_with};
pub use schedule::{make_schedule, NoiseSchedule};
