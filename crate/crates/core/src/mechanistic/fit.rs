use serde::{Deserialize, Serialize};

use super::lm::{minimize_bounded, LmOptions, LmOutcome};
use super::model::{tumor_area, DecayForm, GrowthParams};
use super::series::AreaSeries;
use crate::error::{Error, Result};
use crate::stats::r_squared;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn fixed(value: f64) -> Self {
        Self { lo: value, hi: value }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Per-parameter search box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub a0: Interval,
    pub lambda: Interval,
    pub survival: Interval,
    pub lambda_decay: Interval,
    pub delta: Interval,
    pub slope: Interval,
}

impl Bounds {
    /// Generous default box; `A0` spans a decade either side of the first observation.
    pub fn default_for(series: &AreaSeries) -> Self {
        let first = series.areas()[0];
        Self {
            a0: Interval::new(0.1 * first, 10.0 * first),
            lambda: Interval::new(0.0, 0.2),
            survival: Interval::new(0.0, 1.0),
            lambda_decay: Interval::new(0.0, 0.5),
            delta: Interval::new(0.0, 120.0),
            slope: Interval::new(0.01, 1.0),
        }
    }

    fn as_arrays(&self) -> ([f64; 6], [f64; 6]) {
        let all = [self.a0, self.lambda, self.survival, self.lambda_decay, self.delta, self.slope];
        (all.map(|i| i.lo), all.map(|i| i.hi))
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("a0", self.a0),
            ("lambda", self.lambda),
            ("survival", self.survival),
            ("lambda_decay", self.lambda_decay),
            ("delta", self.delta),
            ("slope", self.slope),
        ];
        for (name, iv) in named {
            if !(iv.lo.is_finite() && iv.hi.is_finite()) || iv.lo > iv.hi {
                return Err(Error::invalid(format!("bounds for {name} are not a finite interval")));
            }
        }
        if self.a0.lo <= 0.0 || self.slope.lo <= 0.0 {
            return Err(Error::invalid("a0 and slope bounds must be strictly positive"));
        }
        if self.survival.lo < 0.0 || self.survival.hi > 1.0 {
            return Err(Error::invalid("survival bounds must lie inside [0, 1]"));
        }
        if self.lambda_decay.lo < 0.0 || self.delta.lo < 0.0 {
            return Err(Error::invalid("lambda_decay and delta bounds must be non-negative"));
        }
        Ok(())
    }

    pub fn contains(&self, p: &GrowthParams) -> bool {
        self.a0.contains(p.a0)
            && self.lambda.contains(p.lambda)
            && self.survival.contains(p.survival)
            && self.lambda_decay.contains(p.lambda_decay)
            && self.delta.contains(p.delta)
            && self.slope.contains(p.slope)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Auto,
    Given(GrowthParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    pub lm: LmOptions,
    pub decay_form: DecayForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: GrowthParams,
    pub residual_sse: f64,
    pub r_squared: f64,
    pub converged: bool,
    pub n_iterations: usize,
}

pub(crate) fn to_vector(p: &GrowthParams) -> [f64; 6] {
    [p.a0, p.lambda, p.survival, p.lambda_decay, p.delta, p.slope]
}

pub(crate) fn from_vector(v: &[f64], t_rt_start: f64, decay_form: DecayForm) -> GrowthParams {
    GrowthParams {
        a0: v[0],
        lambda: v[1],
        survival: v[2],
        lambda_decay: v[3],
        delta: v[4],
        slope: v[5],
        t_rt_start,
        decay_form,
    }
}

/// Deterministic starting points: a log-linear pre-RT estimate of `A0, λ`
/// combined with a few post-RT shapes, plus the box centre.
fn auto_starts(series: &AreaSeries, bounds: &Bounds, decay_form: DecayForm) -> Vec<GrowthParams> {
    let t_rt = series.t_rt_start();
    let pre: Vec<(f64, f64)> = series
        .times()
        .iter()
        .zip(series.areas())
        .filter(|(&t, _)| t < t_rt)
        .map(|(&t, &a)| (t, a.ln()))
        .collect();
    let pts: Vec<(f64, f64)> = if pre.len() >= 2 {
        pre
    } else {
        series.times().iter().zip(series.areas()).take(2).map(|(&t, &a)| (t, a.ln())).collect()
    };
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let lambda = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let lambda = lambda.clamp(bounds.lambda.lo, bounds.lambda.hi);
    let a0 = (my - lambda * mt).exp().clamp(bounds.a0.lo, bounds.a0.hi);

    let last = *series.times().last().unwrap_or(&t_rt);
    let span = (last - t_rt).max(1.0);
    let mut starts = Vec::new();
    for survival in [0.25, 0.75] {
        for delta_frac in [0.2, 0.6] {
            starts.push(GrowthParams {
                a0,
                lambda,
                survival,
                lambda_decay: bounds.lambda_decay.mid(),
                delta: delta_frac * span,
                slope: 0.1,
                t_rt_start: t_rt,
                decay_form,
            });
        }
    }
    let (lo, hi) = bounds.as_arrays();
    let centre: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
    starts.push(from_vector(&centre, t_rt, decay_form));
    starts
}

pub(crate) fn run_lm(
    series: &AreaSeries,
    bounds: &Bounds,
    start: &GrowthParams,
    opts: &FitOptions,
) -> LmOutcome {
    let (lo, hi) = bounds.as_arrays();
    let t_rt = series.t_rt_start();
    let times = series.times();
    let areas = series.areas();
    minimize_bounded(
        |v, r| {
            let p = from_vector(v, t_rt, opts.decay_form);
            for ((ri, &t), &a) in r.iter_mut().zip(times).zip(areas) {
                *ri = tumor_area(t, &p) - a;
            }
        },
        &to_vector(start),
        &lo,
        &hi,
        series.len(),
        &opts.lm,
    )
}

pub(crate) fn finish(series: &AreaSeries, outcome: LmOutcome, opts: &FitOptions) -> Result<FitResult> {
    let params = from_vector(&outcome.params, series.t_rt_start(), opts.decay_form);
    let predicted: Vec<f64> = series.times().iter().map(|&t| tumor_area(t, &params)).collect();
    Ok(FitResult {
        params,
        residual_sse: outcome.sse,
        r_squared: r_squared(series.areas(), &predicted)?,
        converged: outcome.converged,
        n_iterations: outcome.iterations,
    })
}

pub(crate) fn check_fit_inputs(series: &AreaSeries, bounds: &Bounds) -> Result<()> {
    if series.len() < 3 {
        return Err(Error::invalid(format!("fitting needs at least 3 points, got {}", series.len())));
    }
    bounds.validate()
}

/// Bounded least-squares fit of the growth model with default solver options.
pub fn fit_params(series: &AreaSeries, bounds: &Bounds, init: Init) -> Result<FitResult> {
    fit_params_with(series, bounds, init, &FitOptions::default())
}

/// Fit with explicit options. With [`Init::Auto`] several deterministic starts
/// are tried and the lowest-SSE solution is kept.
pub fn fit_params_with(
    series: &AreaSeries,
    bounds: &Bounds,
    init: Init,
    opts: &FitOptions,
) -> Result<FitResult> {
    check_fit_inputs(series, bounds)?;
    let starts = match init {
        Init::Auto => auto_starts(series, bounds, opts.decay_form),
        Init::Given(p) => vec![p],
    };
    let best = starts
        .iter()
        .map(|s| run_lm(series, bounds, s, opts))
        .min_by(|a, b| a.sse.total_cmp(&b.sse))
        .expect("at least one start");
    if !best.sse.is_finite() {
        return Err(Error::Numerical("growth model produced non-finite residuals".into()));
    }
    finish(series, best, opts)
}
