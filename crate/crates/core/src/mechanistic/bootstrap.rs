use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{check_fit_inputs, finish, fit_params_with, run_lm, Bounds, FitOptions, Init};
use super::model::{tumor_area, GrowthParams};
use super::series::AreaSeries;
use crate::error::{Error, Result};
use crate::seed::{child_seed, rng_from_seed};
use crate::stats::percentiles;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// `Ã = A · (1 + σ·z)`
    #[default]
    Multiplicative,
    /// `Ã = A + σ·mean(A)·z`
    Additive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub n: usize,
    pub noise_sigma: f64,
    pub noise_model: NoiseModel,
    pub seed: u64,
    pub fit: FitOptions,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n: 100,
            noise_sigma: 0.10,
            noise_model: NoiseModel::Multiplicative,
            seed: 0,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateDiagnostics {
    pub converged: bool,
    pub residual_sse: f64,
    pub n_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEnsemble {
    pub replicates: Vec<GrowthParams>,
    pub diagnostics: Vec<ReplicateDiagnostics>,
    pub noise_sigma: f64,
    pub noise_model: NoiseModel,
    pub seed: u64,
}

impl BootstrapEnsemble {
    pub fn len(&self) -> usize {
        self.replicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicates.is_empty()
    }

    pub fn predictions(&self, t: f64) -> Vec<f64> {
        self.replicates.iter().map(|p| tumor_area(t, p)).collect()
    }

    pub fn n_converged(&self) -> usize {
        self.diagnostics.iter().filter(|d| d.converged).count()
    }
}

/// Floor for perturbed areas, as a fraction of the unperturbed value.
const MIN_PERTURBED_FRACTION: f64 = 1e-6;

fn random_start(rng: &mut impl Rng, bounds: &Bounds, template: &GrowthParams) -> GrowthParams {
    let mut draw = |iv: super::fit::Interval| {
        if iv.hi > iv.lo {
            rng.random_range(iv.lo..=iv.hi)
        } else {
            iv.lo
        }
    };
    GrowthParams {
        a0: draw(bounds.a0),
        lambda: draw(bounds.lambda),
        survival: draw(bounds.survival),
        lambda_decay: draw(bounds.lambda_decay),
        delta: draw(bounds.delta),
        slope: draw(bounds.slope),
        ..*template
    }
}

/// Re-fits the model to `n` noise-perturbed copies of `series`.
///
/// Each replicate draws its noise and a uniform random start inside `bounds`
/// from its own child seed, and is also warm-started from the fit to the
/// unperturbed data; the lower-SSE solution is kept. Replicates run in
/// parallel and are stored by index, so the ensemble depends only on the seed.
pub fn bootstrap_fit(
    series: &AreaSeries,
    bounds: &Bounds,
    cfg: &BootstrapConfig,
) -> Result<BootstrapEnsemble> {
    if cfg.n == 0 {
        return Err(Error::invalid("bootstrap needs at least one replicate"));
    }
    if !(cfg.noise_sigma.is_finite() && cfg.noise_sigma >= 0.0) {
        return Err(Error::invalid("noise_sigma must be non-negative"));
    }
    check_fit_inputs(series, bounds)?;
    let base = fit_params_with(series, bounds, Init::Auto, &cfg.fit)?;
    let mean_area = series.areas().iter().sum::<f64>() / series.len() as f64;

    let fits: Vec<Result<(GrowthParams, ReplicateDiagnostics)>> = (0..cfg.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(child_seed(cfg.seed, i as u64));
            let areas: Vec<f64> = series
                .areas()
                .iter()
                .map(|&a| {
                    let z: f64 = rng.sample(StandardNormal);
                    let perturbed = match cfg.noise_model {
                        NoiseModel::Multiplicative => a * (1.0 + cfg.noise_sigma * z),
                        NoiseModel::Additive => a + cfg.noise_sigma * mean_area * z,
                    };
                    perturbed.max(MIN_PERTURBED_FRACTION * a)
                })
                .collect();
            let perturbed = series.with_areas(areas)?;
            let start = random_start(&mut rng, bounds, &base.params);
            let from_random = run_lm(&perturbed, bounds, &start, &cfg.fit);
            let from_base = run_lm(&perturbed, bounds, &base.params, &cfg.fit);
            let best = if from_random.sse < from_base.sse { from_random } else { from_base };
            let fit = finish(&perturbed, best, &cfg.fit)?;
            Ok((
                fit.params,
                ReplicateDiagnostics {
                    converged: fit.converged,
                    residual_sse: fit.residual_sse,
                    n_iterations: fit.n_iterations,
                },
            ))
        })
        .collect();

    let mut replicates = Vec::with_capacity(cfg.n);
    let mut diagnostics = Vec::with_capacity(cfg.n);
    for fit in fits {
        let (p, d) = fit?;
        replicates.push(p);
        diagnostics.push(d);
    }
    Ok(BootstrapEnsemble {
        replicates,
        diagnostics,
        noise_sigma: cfg.noise_sigma,
        noise_model: cfg.noise_model,
        seed: cfg.seed,
    })
}

/// Percentiles (linear interpolation) of the ensemble's predicted area at `t`.
pub fn predict_quantiles(ens: &BootstrapEnsemble, t: f64, quantiles: &[f64]) -> Result<Vec<f64>> {
    if ens.is_empty() {
        return Err(Error::invalid("empty bootstrap ensemble"));
    }
    percentiles(&ens.predictions(t), quantiles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanistic::model::DecayForm;

    fn truth() -> GrowthParams {
        GrowthParams {
            a0: 120.0,
            lambda: 0.025,
            survival: 0.35,
            lambda_decay: 0.06,
            delta: 12.0,
            slope: 0.2,
            t_rt_start: 40.0,
            decay_form: DecayForm::Gated,
        }
    }

    fn noiseless() -> AreaSeries {
        let times = vec![0.0, 15.0, 30.0, 45.0, 60.0, 80.0, 100.0, 130.0];
        let areas = times.iter().map(|&t| tumor_area(t, &truth())).collect();
        AreaSeries::new(times, areas, 40.0, 2e4).unwrap()
    }

    #[test]
    fn zero_noise_reproduces_the_deterministic_fit() {
        let s = noiseless();
        let bounds = Bounds::default_for(&s);
        let cfg = BootstrapConfig { n: 5, noise_sigma: 0.0, seed: 3, ..Default::default() };
        let ens = bootstrap_fit(&s, &bounds, &cfg).unwrap();
        let t_future = 160.0;
        let base = tumor_area(t_future, &fit_params_with(&s, &bounds, Init::Auto, &cfg.fit).unwrap().params);
        for p in &ens.replicates {
            let pred = tumor_area(t_future, p);
            assert!((pred - base).abs() < 1e-4 * base, "{pred} vs {base}");
        }
    }

    #[test]
    fn same_seed_same_ensemble() {
        let s = noiseless();
        let bounds = Bounds::default_for(&s);
        let cfg = BootstrapConfig { n: 8, seed: 11, ..Default::default() };
        let a = bootstrap_fit(&s, &bounds, &cfg).unwrap();
        let b = bootstrap_fit(&s, &bounds, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = bootstrap_fit(&s, &bounds, &BootstrapConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn replicates_respect_bounds() {
        let s = noiseless();
        let bounds = Bounds::default_for(&s);
        let ens = bootstrap_fit(&s, &bounds, &BootstrapConfig { n: 10, seed: 1, ..Default::default() }).unwrap();
        assert_eq!(ens.len(), 10);
        for p in &ens.replicates {
            assert!(bounds.contains(p));
            p.validate().unwrap();
        }
    }

    #[test]
    fn identical_replicates_collapse_every_quantile() {
        let ens = BootstrapEnsemble {
            replicates: vec![truth(); 4],
            diagnostics: vec![ReplicateDiagnostics { converged: true, residual_sse: 0.0, n_iterations: 1 }; 4],
            noise_sigma: 0.0,
            noise_model: NoiseModel::Multiplicative,
            seed: 0,
        };
        let single = tumor_area(90.0, &truth());
        for v in predict_quantiles(&ens, 90.0, &[2.5, 50.0, 97.5]).unwrap() {
            assert_eq!(v, single);
        }
    }

    #[test]
    fn empty_ensemble_is_invalid() {
        let ens = BootstrapEnsemble {
            replicates: vec![],
            diagnostics: vec![],
            noise_sigma: 0.1,
            noise_model: NoiseModel::Multiplicative,
            seed: 0,
        };
        assert!(matches!(predict_quantiles(&ens, 1.0, &[50.0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn zero_replicates_is_invalid() {
        let s = noiseless();
        let cfg = BootstrapConfig { n: 0, ..Default::default() };
        assert!(bootstrap_fit(&s, &Bounds::default_for(&s), &cfg).is_err());
    }
}
