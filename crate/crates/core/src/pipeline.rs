//! End-to-end orchestration: fit the growth model, turn extrapolated areas
//! into guidance targets, generate follow-up images and aggregate them into
//! growth probability maps. Also the NL × s_ct grid-search harness.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{
    generate, make_schedule, DenoiserSpec, GuidanceConfig, NoiseSchedule, RegressorInput,
    RegressorSpec,
};
use crate::error::{Error, Result};
use crate::image::{BinaryMask, Image2D};
use crate::mechanistic::{
    bootstrap_fit, tumor_area, AreaSeries, BootstrapConfig, BootstrapEnsemble, Bounds, DecayForm,
    FitOptions, NoiseModel,
};
use crate::metrics::{
    aggregate_probability_map, binarized_difference, dilate_to_double_area, ssim_region,
    threshold_probability_map, MapMode, ProbabilityMap,
};
use crate::seed::child_seed;
use crate::stats::percentile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { steps: 1000, beta_start: 1e-4, beta_end: 0.02 }
    }
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<NoiseSchedule> {
        make_schedule(self.steps, self.beta_start, self.beta_end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub nl: usize,
    pub s_ct: f64,
    pub dyn_clamp: f64,
    pub schedule: ScheduleConfig,
    pub n_bootstrap: usize,
    pub noise_sigma: f64,
    pub noise_model: NoiseModel,
    pub decay_form: DecayForm,
    pub target_percentile_cap: f64,
    pub probmap_mode: MapMode,
    pub theta: f64,
    pub seed: u64,
    pub denoiser: DenoiserSpec,
    pub regressor: RegressorSpec,
    /// Intensity above which a brain pixel counts as tumor in the reference.
    pub segmentation_threshold: f64,
    /// Worker threads for parallel generations; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            nl: 200,
            s_ct: 50_000.0,
            dyn_clamp: 1.0,
            schedule: ScheduleConfig::default(),
            n_bootstrap: 100,
            noise_sigma: 0.10,
            noise_model: NoiseModel::Multiplicative,
            decay_form: DecayForm::Gated,
            target_percentile_cap: 90.0,
            probmap_mode: MapMode::Dynamic,
            theta: 0.5,
            seed: 0,
            denoiser: DenoiserSpec::AnalyticGaussian { s0: DEFAULT_S0 },
            regressor: RegressorSpec::SoftArea {
                tau: DEFAULT_TAU,
                softness: DEFAULT_SOFTNESS,
                input: RegressorInput::PredictedClean,
            },
            segmentation_threshold: DEFAULT_TAU,
            workers: None,
        }
    }
}

pub const DEFAULT_S0: f64 = 0.1;
pub const DEFAULT_TAU: f64 = 0.6;
pub const DEFAULT_SOFTNESS: f64 = 0.03;

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let sched = self.schedule.build()?;
        sched.check_step(self.nl)?;
        if !(self.s_ct.is_finite() && self.s_ct >= 0.0) {
            return Err(Error::invalid("s_ct must be non-negative"));
        }
        if !(self.dyn_clamp.is_finite() && self.dyn_clamp > 0.0) {
            return Err(Error::invalid("dyn_clamp must be positive"));
        }
        if self.n_bootstrap == 0 {
            return Err(Error::invalid("n_bootstrap must be at least 1"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma must be non-negative"));
        }
        if !(0.0..=100.0).contains(&self.target_percentile_cap) {
            return Err(Error::invalid("target_percentile_cap must lie in [0, 100]"));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::invalid("theta must lie in [0, 1]"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers must be at least 1"));
        }
        Ok(())
    }

    /// Reads a JSON config; missing fields take their defaults.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_slice(&std::fs::read(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn bootstrap_config(&self) -> BootstrapConfig {
        BootstrapConfig {
            n: self.n_bootstrap,
            noise_sigma: self.noise_sigma,
            noise_model: self.noise_model,
            seed: child_seed(self.seed, 0),
            fit: FitOptions { decay_form: self.decay_form, ..FitOptions::default() },
        }
    }

    /// Forward-noise seed of the `index`-th generation.
    pub fn generation_seed(&self, index: usize) -> u64 {
        child_seed(child_seed(self.seed, 1), index as u64)
    }

    fn in_pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.workers {
            None => Ok(f()),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map(|pool| pool.install(f))
                .map_err(|e| Error::Pipeline(format!("worker pool: {e}"))),
        }
    }
}

/// Brain pixels of `image` above the segmentation threshold.
pub fn segment_tumor(image: &Image2D, brain_mask: &BinaryMask, threshold: f64) -> Result<BinaryMask> {
    BinaryMask::from_threshold(image, threshold).intersection(brain_mask)
}

/// One guided generation from `reference` toward `target` (tumor fraction).
#[allow(clippy::too_many_arguments)]
pub fn generate_one(
    reference: &Image2D,
    brain_mask: &BinaryMask,
    target: f64,
    nl: usize,
    s_ct: f64,
    cfg: &RunConfig,
    sched: &NoiseSchedule,
    seed: u64,
) -> Result<Image2D> {
    let guidance = GuidanceConfig { s_ct, dyn_clamp: cfg.dyn_clamp, target };
    let mut denoiser = cfg.denoiser.build(reference)?;
    let mut regressor = cfg.regressor.build(brain_mask)?;
    generate(reference, nl, denoiser.as_mut(), regressor.as_mut(), &guidance, sched, seed)
}

/// Generates one image per `(target, seed)` in parallel and returns them in order.
pub fn generate_batch(
    reference: &Image2D,
    brain_mask: &BinaryMask,
    jobs: &[(f64, u64)],
    cfg: &RunConfig,
) -> Result<Vec<Image2D>> {
    cfg.validate()?;
    if !brain_mask.matches_image(reference) {
        return Err(Error::invalid("brain mask shape does not match the reference image"));
    }
    let sched = cfg.schedule.build()?;
    cfg.in_pool(|| {
        jobs.par_iter()
            .map(|&(target, seed)| {
                generate_one(reference, brain_mask, target, cfg.nl, cfg.s_ct, cfg, &sched, seed)
            })
            .collect::<Vec<Result<Image2D>>>()
    })?
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Guidance target (tumor fraction) of each generation.
    pub targets: Vec<f64>,
    pub generated: Vec<Image2D>,
    pub difference_masks: Vec<BinaryMask>,
    pub map: ProbabilityMap,
    /// Probability map thresholded at `theta`.
    pub map_mask: BinaryMask,
    /// `map_mask` joined with the tumor segmented on the reference.
    pub predicted_mask: BinaryMask,
}

fn aggregate(
    reference: &Image2D,
    brain_mask: &BinaryMask,
    targets: Vec<f64>,
    generated: Vec<Image2D>,
    mode: MapMode,
    cfg: &RunConfig,
) -> Result<Prediction> {
    let difference_masks = generated
        .iter()
        .map(|g| binarized_difference(g, reference))
        .collect::<Result<Vec<_>>>()?;
    let map = aggregate_probability_map(&difference_masks, mode)?;
    let map_mask = threshold_probability_map(&map, cfg.theta)?;
    let current = segment_tumor(reference, brain_mask, cfg.segmentation_threshold)?;
    let predicted_mask = map_mask.union(&current)?;
    Ok(Prediction { targets, generated, difference_masks, map, map_mask, predicted_mask })
}

/// Replicate predictions at `t_future` as brain fractions, keeping those at or
/// below the configured percentile. Returns `(replicate index, fraction)`.
pub fn capped_targets(
    ens: &BootstrapEnsemble,
    t_future: f64,
    brain_area_px: usize,
    pixel_spacing: f64,
    cap: f64,
) -> Result<Vec<(usize, f64)>> {
    if brain_area_px == 0 {
        return Err(Error::invalid("brain mask is empty"));
    }
    let brain_mm2 = brain_area_px as f64 * pixel_spacing * pixel_spacing;
    let fractions: Vec<f64> = ens.replicates.iter().map(|p| tumor_area(t_future, p) / brain_mm2).collect();
    let limit = percentile(&fractions, cap)?;
    let kept: Vec<(usize, f64)> = fractions
        .into_iter()
        .enumerate()
        .filter(|&(_, f)| f <= limit)
        .map(|(i, f)| (i, f.clamp(0.0, 1.0 - 1e-9)))
        .collect();
    Ok(kept)
}

/// Generations toward an existing ensemble's capped targets at `t_future`.
pub fn predict_from_ensemble(
    ens: &BootstrapEnsemble,
    reference: &Image2D,
    brain_mask: &BinaryMask,
    t_future: f64,
    cfg: &RunConfig,
) -> Result<Prediction> {
    cfg.validate()?;
    let kept = capped_targets(
        ens,
        t_future,
        brain_mask.count(),
        reference.pixel_spacing(),
        cfg.target_percentile_cap,
    )?;
    let jobs: Vec<(f64, u64)> = kept.iter().map(|&(i, f)| (f, cfg.generation_seed(i))).collect();
    let generated = generate_batch(reference, brain_mask, &jobs, cfg)?;
    let targets = jobs.into_iter().map(|(f, _)| f).collect();
    aggregate(reference, brain_mask, targets, generated, MapMode::Dynamic, cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicPrediction {
    pub ensemble: BootstrapEnsemble,
    pub prediction: Prediction,
}

/// Fit → bootstrap → capped per-replicate targets → guided generations →
/// binarized differences → dynamic probability map.
pub fn run_dynamic_prediction(
    series: &AreaSeries,
    reference: &Image2D,
    brain_mask: &BinaryMask,
    t_future: f64,
    cfg: &RunConfig,
) -> Result<DynamicPrediction> {
    cfg.validate()?;
    let bounds = Bounds::default_for(series);
    let ensemble = bootstrap_fit(series, &bounds, &cfg.bootstrap_config())?;
    if ensemble.n_converged() == 0 {
        let sse: Vec<String> =
            ensemble.diagnostics.iter().take(5).map(|d| format!("{:.3e}", d.residual_sse)).collect();
        return Err(Error::Pipeline(format!(
            "no bootstrap replicate converged (first residual SSEs: {})",
            sse.join(", ")
        )));
    }
    let prediction = predict_from_ensemble(&ensemble, reference, brain_mask, t_future, cfg)?;
    Ok(DynamicPrediction { ensemble, prediction })
}

/// `n_repeats` generations toward one target with distinct forward noise.
pub fn run_static_prediction(
    reference: &Image2D,
    brain_mask: &BinaryMask,
    target_fraction: f64,
    n_repeats: usize,
    cfg: &RunConfig,
) -> Result<Prediction> {
    if n_repeats == 0 {
        return Err(Error::invalid("n_repeats must be at least 1"));
    }
    let jobs: Vec<(f64, u64)> = (0..n_repeats).map(|i| (target_fraction, cfg.generation_seed(i))).collect();
    let generated = generate_batch(reference, brain_mask, &jobs, cfg)?;
    aggregate(reference, brain_mask, vec![target_fraction; n_repeats], generated, MapMode::Static, cfg)
}

/// A reference scan with its segmented next visit.
#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalPair {
    pub reference: Image2D,
    pub follow_up: Image2D,
    pub follow_up_mask: BinaryMask,
    pub brain_mask: BinaryMask,
}

impl LongitudinalPair {
    /// Tumor fraction of the follow-up, the guidance target.
    pub fn target_fraction(&self) -> f64 {
        self.follow_up_mask.count() as f64 / self.brain_mask.count().max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub nl: usize,
    pub s_ct: f64,
    pub ssim_tumor: f64,
    pub ssim_outside: f64,
}

/// Mean region SSIM between generations and real follow-ups for every
/// `(nl, s_ct)` cell: inside the follow-up tumor mask and outside its
/// area-doubling dilation.
pub fn grid_search(
    pairs: &[LongitudinalPair],
    nl_values: &[usize],
    s_ct_values: &[f64],
    cfg: &RunConfig,
) -> Result<Vec<GridRow>> {
    cfg.validate()?;
    if pairs.is_empty() || nl_values.is_empty() || s_ct_values.is_empty() {
        return Err(Error::invalid("grid search needs pairs and nonempty grids"));
    }
    let sched = cfg.schedule.build()?;
    for &nl in nl_values {
        sched.check_step(nl)?;
    }
    let mut regions = Vec::with_capacity(pairs.len());
    for p in pairs {
        p.reference.check_shape(&p.follow_up, "follow-up")?;
        let outside = dilate_to_double_area(&p.follow_up_mask)?.mask.complement();
        regions.push(outside);
    }
    let cells: Vec<(usize, f64)> =
        nl_values.iter().flat_map(|&nl| s_ct_values.iter().map(move |&s| (nl, s))).collect();
    let rows = cfg.in_pool(|| {
        cells
            .par_iter()
            .map(|&(nl, s_ct)| {
                let mut tumor = 0.0;
                let mut outside = 0.0;
                for (i, (p, out_region)) in pairs.iter().zip(&regions).enumerate() {
                    let gen = generate_one(
                        &p.reference,
                        &p.brain_mask,
                        p.target_fraction(),
                        nl,
                        s_ct,
                        cfg,
                        &sched,
                        cfg.generation_seed(i),
                    )?;
                    tumor += ssim_region(&gen, &p.follow_up, &p.follow_up_mask)?;
                    outside += ssim_region(&gen, &p.follow_up, out_region)?;
                }
                let n = pairs.len() as f64;
                Ok(GridRow { nl, s_ct, ssim_tumor: tumor / n, ssim_outside: outside / n })
            })
            .collect::<Vec<Result<GridRow>>>()
    })?;
    rows.into_iter().collect()
}

pub fn write_grid_csv(rows: &[GridRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
