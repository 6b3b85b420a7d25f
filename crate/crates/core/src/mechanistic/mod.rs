//! Radiotherapy-aware tumor-growth model: evaluation, bounded least-squares
//! fitting, bootstrap ensembles and fit scoring.
//!
//! Before radiotherapy the axial tumor area grows exponentially. At RT onset it
//! splits into a surviving compartment that keeps growing at the same rate and a
//! dying compartment whose rate is gated by a shifted `tanh`, so the dying part
//! keeps growing briefly and then shrinks.

mod bootstrap;
mod evaluate;
mod fit;
mod lm;
mod model;
mod series;

pub use bootstrap::{
    bootstrap_fit, predict_quantiles, BootstrapConfig, BootstrapEnsemble, NoiseModel,
    ReplicateDiagnostics,
};
pub use evaluate::{evaluate_fit, FitEvaluation, FitMode};
pub use fit::{fit_params, fit_params_with, Bounds, FitOptions, FitResult, Init, Interval};
pub use lm::{minimize_bounded, LmOptions, LmOutcome};
pub use model::{tumor_area, DecayForm, GrowthParams};
pub use series::{AreaSeries, SeriesMeta};
