use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_fit, BootstrapConfig};
use super::fit::Bounds;
use super::series::AreaSeries;
use crate::error::{Error, Result};
use crate::stats::{median, r_squared};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Fit and score on every observation.
    All,
    /// Fit on all but the last observation and score the extrapolation to it.
    Train,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitEvaluation {
    pub mode: FitMode,
    /// Bootstrap-median predictions against the fitted observations.
    pub r_squared: f64,
    /// `|median(t_last) - A(t_last)| / A(t_last)`; train mode only.
    pub nrmse: Option<f64>,
    pub times: Vec<f64>,
    pub median_curve: Vec<f64>,
}

/// Scores a bootstrap fit. `bounds = None` uses [`Bounds::default_for`] on the fitted points.
pub fn evaluate_fit(
    series: &AreaSeries,
    mode: FitMode,
    bounds: Option<&Bounds>,
    cfg: &BootstrapConfig,
) -> Result<FitEvaluation> {
    let (fitted, held_out) = match mode {
        FitMode::All => (series.clone(), None),
        FitMode::Train => {
            if series.len() < 4 {
                return Err(Error::invalid("train mode needs at least 4 points"));
            }
            let (head, last) = series.split_last()?;
            (head, Some(last))
        }
    };
    let bounds = bounds.copied().unwrap_or_else(|| Bounds::default_for(&fitted));
    let ens = bootstrap_fit(&fitted, &bounds, cfg)?;

    let times = series.times().to_vec();
    let median_curve = times
        .iter()
        .map(|&t| median(&ens.predictions(t)))
        .collect::<Result<Vec<_>>>()?;
    let n_fit = fitted.len();
    let r2 = r_squared(fitted.areas(), &median_curve[..n_fit])?;
    let nrmse = held_out.map(|(_, observed)| (median_curve[n_fit] - observed).abs() / observed);
    Ok(FitEvaluation { mode, r_squared: r2, nrmse, times, median_curve })
}
