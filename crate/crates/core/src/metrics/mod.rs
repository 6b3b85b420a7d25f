//! Image-quality and segmentation metrics, difference-map binarization,
//! probability maps and the Wilcoxon signed-rank test.

mod hd95;
mod morphology;
mod otsu;
mod probmap;
mod ssim;
mod wilcoxon;

pub use hd95::{boundary, hd95};
pub use morphology::{dilate_3x3, dilate_to_double_area, Dilation};
pub use otsu::otsu_threshold;
pub use probmap::{
    aggregate_probability_map, binarized_difference, threshold_probability_map, MapMode,
    ProbabilityMap,
};
pub use ssim::{ssim_region, SSIM_WINDOW};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonMethod, WilcoxonResult, EXACT_MAX_N};
