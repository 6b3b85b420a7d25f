use rand::Rng;
use rand_distr::StandardNormal;

use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};
use crate::image::Image2D;

/// `√ᾱ · x0 + √(1-ᾱ) · eps` for an explicit `ᾱ` and noise image.
pub fn forward_noise_with(x0: &Image2D, alpha_bar: f64, eps: &Image2D) -> Result<Image2D> {
    let (a, b) = (alpha_bar.sqrt(), (1.0 - alpha_bar).sqrt());
    x0.zip_map(eps, |x, e| a * x + b * e)
}

/// Noises `x0` to step `l` with fresh standard-normal noise; returns `(x_l, ε)`.
pub fn forward_noise(
    x0: &Image2D,
    l: usize,
    sched: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<(Image2D, Image2D)> {
    sched.check_step(l)?;
    let eps = x0.map(|_| 0.0).with_pixels(
        (0..x0.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
    )?;
    let xl = forward_noise_with(x0, sched.alpha_bar(l), &eps)?;
    Ok((xl, eps))
}

/// One reverse step `x_l → x_{l-1}`:
///
/// `x_{l-1} = √ᾱ_{l-1} · (x_l - √(1-ᾱ_l)·ε) / √ᾱ_l + √(1-ᾱ_{l-1}-σ²) · ε + σ · z`
///
/// `σ = 0` is the deterministic DDIM update; `eps_noise` (`z`) is required
/// exactly when `σ > 0`.
pub fn ddim_step(
    x_l: &Image2D,
    l: usize,
    eps: &Image2D,
    sched: &NoiseSchedule,
    sigma: f64,
    eps_noise: Option<&Image2D>,
) -> Result<Image2D> {
    sched.check_step(l)?;
    x_l.check_shape(eps, "ddim_step eps")?;
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid("sigma must be non-negative"));
    }
    let a_l = sched.alpha_bar(l);
    let a_prev = sched.alpha_bar(l - 1);
    let radicand = 1.0 - a_prev - sigma * sigma;
    if radicand < 0.0 {
        return Err(Error::invalid(format!(
            "sigma² = {} exceeds 1 - ᾱ_(l-1) = {}",
            sigma * sigma,
            1.0 - a_prev
        )));
    }
    let (sa_l, sb_l) = (a_l.sqrt(), (1.0 - a_l).sqrt());
    let (sa_prev, dir) = (a_prev.sqrt(), radicand.sqrt());
    let mut out: Vec<f64> = x_l
        .pixels()
        .iter()
        .zip(eps.pixels())
        .map(|(&x, &e)| sa_prev * ((x - sb_l * e) / sa_l) + dir * e)
        .collect();
    match (sigma > 0.0, eps_noise) {
        (true, Some(z)) => {
            x_l.check_shape(z, "ddim_step noise")?;
            for (o, &zi) in out.iter_mut().zip(z.pixels()) {
                *o += sigma * zi;
            }
        }
        (true, None) => return Err(Error::invalid("sigma > 0 requires a noise image")),
        (false, Some(_)) => return Err(Error::invalid("noise image given with sigma = 0")),
        (false, None) => {}
    }
    x_l.with_pixels(out)
}
