//! Windowed SSIM averaged over a region of window centres.
//!
//! Uniform 7×7 windows, data range 1, `C1 = (0.01)²`, `C2 = (0.03)²`, sample
//! (N-1) covariance. Only windows lying fully inside the image are scored.

use crate::error::{Error, Result};
use crate::image::{BinaryMask, Image2D};

pub const SSIM_WINDOW: usize = 7;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

/// Summed-area table with a zero border row/column.
struct Integral {
    w: usize,
    table: Vec<f64>,
}

impl Integral {
    fn new(w: usize, h: usize, f: impl Fn(usize) -> f64) -> Self {
        let stride = w + 1;
        let mut table = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += f(y * w + x);
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row;
            }
        }
        Self { w, table }
    }

    /// Sum over `[x0, x0+k) × [y0, y0+k)`.
    fn window(&self, x0: usize, y0: usize, k: usize) -> f64 {
        let s = self.w + 1;
        let (x1, y1) = (x0 + k, y0 + k);
        self.table[y1 * s + x1] - self.table[y0 * s + x1] - self.table[y1 * s + x0]
            + self.table[y0 * s + x0]
    }
}

/// Mean SSIM over valid window centres inside `region`.
pub fn ssim_region(a: &Image2D, b: &Image2D, region: &BinaryMask) -> Result<f64> {
    a.check_shape(b, "ssim_region")?;
    if !region.matches_image(a) {
        return Err(Error::invalid("ssim_region: region shape differs from images"));
    }
    let k = SSIM_WINDOW;
    if region.count() < k * k {
        return Err(Error::degenerate("region smaller than one SSIM window"));
    }
    let (w, h) = (a.width(), a.height());
    if w < k || h < k {
        return Err(Error::degenerate("image smaller than one SSIM window"));
    }
    let (pa, pb) = (a.pixels(), b.pixels());
    let sa = Integral::new(w, h, |i| pa[i]);
    let sb = Integral::new(w, h, |i| pb[i]);
    let saa = Integral::new(w, h, |i| pa[i] * pa[i]);
    let sbb = Integral::new(w, h, |i| pb[i] * pb[i]);
    let sab = Integral::new(w, h, |i| pa[i] * pb[i]);
    let n = (k * k) as f64;
    let cov_norm = n / (n - 1.0);
    let half = k / 2;

    let mut total = 0.0;
    let mut count = 0usize;
    for cy in half..h - half {
        for cx in half..w - half {
            if !region.get(cx, cy) {
                continue;
            }
            let (x0, y0) = (cx - half, cy - half);
            let mu_a = sa.window(x0, y0, k) / n;
            let mu_b = sb.window(x0, y0, k) / n;
            let var_a = cov_norm * (saa.window(x0, y0, k) / n - mu_a * mu_a);
            let var_b = cov_norm * (sbb.window(x0, y0, k) / n - mu_b * mu_b);
            let cov = cov_norm * (sab.window(x0, y0, k) / n - mu_a * mu_b);
            let num = (2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2);
            let den = (mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2);
            total += num / den;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::degenerate("region has no window centre inside the valid area"));
    }
    Ok(total / count as f64)
}
