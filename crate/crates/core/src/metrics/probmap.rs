use serde::{Deserialize, Serialize};

use super::otsu::otsu_threshold;
use crate::error::{Error, Result};
use crate::image::{BinaryMask, Image2D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapMode {
    /// Repeated generations toward one target with different forward noise.
    Static,
    /// Generations toward bootstrap-sampled targets.
    Dynamic,
}

impl std::str::FromStr for MapMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(MapMode::Static),
            "dynamic" => Ok(MapMode::Dynamic),
            other => Err(Error::invalid(format!("unknown map mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub n_aggregated: usize,
    pub mode: MapMode,
}

impl ProbabilityMap {
    pub fn to_image(&self, pixel_spacing: f64) -> Result<Image2D> {
        Image2D::new(self.width, self.height, pixel_spacing, self.values.clone())
    }
}

/// Growth mask: positive part of `generated - original`, binarized with Otsu.
/// An all-zero difference gives an empty mask.
pub fn binarized_difference(generated: &Image2D, original: &Image2D) -> Result<BinaryMask> {
    let diff = generated.zip_map(original, |g, o| (g - o).max(0.0))?;
    match otsu_threshold(&diff, 256) {
        Ok(t) => Ok(BinaryMask::from_threshold(&diff, t)),
        Err(Error::Degenerate(_)) => Ok(BinaryMask::empty(diff.width(), diff.height())),
        Err(e) => Err(e),
    }
}

/// Pixelwise mean of binary masks.
pub fn aggregate_probability_map(masks: &[BinaryMask], mode: MapMode) -> Result<ProbabilityMap> {
    let first = masks.first().ok_or_else(|| Error::invalid("no masks to aggregate"))?;
    if masks.iter().any(|m| !m.same_shape(first)) {
        return Err(Error::invalid("masks to aggregate differ in shape"));
    }
    let mut counts = vec![0u32; first.bits().len()];
    for m in masks {
        for (c, &b) in counts.iter_mut().zip(m.bits()) {
            *c += b as u32;
        }
    }
    let n = masks.len() as f64;
    Ok(ProbabilityMap {
        width: first.width(),
        height: first.height(),
        values: counts.iter().map(|&c| c as f64 / n).collect(),
        n_aggregated: masks.len(),
        mode,
    })
}

/// Pixels with probability `≥ theta`.
pub fn threshold_probability_map(pm: &ProbabilityMap, theta: f64) -> Result<BinaryMask> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::invalid("theta must lie in [0, 1]"));
    }
    BinaryMask::new(pm.width, pm.height, pm.values.iter().map(|&v| v >= theta).collect())
}
