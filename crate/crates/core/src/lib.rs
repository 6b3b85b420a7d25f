//! Mechanistic learning for longitudinal tumor imaging.
//!
//! The crate couples a radiotherapy-aware tumor-growth model (fitted to sparse
//! area measurements with bootstrap uncertainty) with a regressor-guided DDIM
//! sampler that edits a reference slice toward an extrapolated tumor size.
//! Generations are aggregated into tumor-growth probability maps and scored with
//! region SSIM, HD95 and the Wilcoxon signed-rank test.
//!
//! Module map:
//! - [`mechanistic`]: growth model, bounded least-squares fit, bootstrap ensembles.
//! - [`diffusion`]: noise schedules, forward noising, DDIM updates, guidance, plugins.
//! - [`metrics`]: Otsu, dilation, SSIM, HD95, probability maps, Wilcoxon.
//! - [`phantom`]: synthetic longitudinal brain/tumor slices with ground truth.
//! - [`pipeline`]: end-to-end dynamic/static prediction and grid search.

pub mod diffusion;
pub mod error;
pub mod image;
pub mod mechanistic;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
pub use image::{BinaryMask, Image2D};
