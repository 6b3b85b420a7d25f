use crate::error::{Error, Result};
use crate::image::Image2D;

/// Otsu threshold over an `n_bins` histogram spanning `[min, max]`.
///
/// Candidates are the interior bin edges `min + k·w`, `k = 1..n_bins-1`; the
/// one maximising the between-class variance wins, ties going to the lower
/// edge. A pixel belongs to the upper class iff it is strictly above the
/// returned threshold.
pub fn otsu_threshold(img: &Image2D, n_bins: usize) -> Result<f64> {
    if n_bins < 2 {
        return Err(Error::invalid("Otsu needs at least 2 bins"));
    }
    let (lo, hi) = img.min_max();
    if hi <= lo {
        return Err(Error::degenerate("Otsu threshold of a constant image"));
    }
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    let mut sums = vec![0.0; n_bins];
    for &v in img.pixels() {
        // Values sitting exactly on an edge belong to the bin below it.
        let pos = ((v - lo) / width).ceil() as isize - 1;
        let bin = pos.clamp(0, n_bins as isize - 1) as usize;
        counts[bin] += 1;
        sums[bin] += v;
    }
    let total_n = img.len() as f64;
    let total_sum: f64 = sums.iter().sum();

    let mut best_k = 0;
    let mut best_var = f64::NEG_INFINITY;
    let (mut n0, mut s0) = (0usize, 0.0);
    for k in 0..n_bins - 1 {
        n0 += counts[k];
        s0 += sums[k];
        let n1 = img.len() - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let (w0, w1) = (n0 as f64 / total_n, n1 as f64 / total_n);
        let (m0, m1) = (s0 / n0 as f64, (total_sum - s0) / n1 as f64);
        let var = w0 * w1 * (m0 - m1) * (m0 - m1);
        if var > best_var {
            best_var = var;
            best_k = k;
        }
    }
    Ok(lo + (best_k + 1) as f64 * width)
}
