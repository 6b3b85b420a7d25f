use crate::error::{Error, Result};
use crate::image::BinaryMask;
use crate::stats::percentile;

/// Set pixels with at least one 8-neighbour outside the mask; pixels on the
/// image border count as touching the outside.
pub fn boundary(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    BinaryMask::from_fn(w, h, |x, y| {
        if !mask.get(x, y) {
            return false;
        }
        if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
            return true;
        }
        (y - 1..=y + 1).any(|yy| (x - 1..=x + 1).any(|xx| !mask.get(xx, yy)))
    })
}

/// Exact 1-D squared distance transform (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        if f[q].is_infinite() {
            continue;
        }
        loop {
            let p = v[k];
            if f[p].is_infinite() {
                // Replace an infinite seed outright.
                v[k] = q;
                z[k + 1] = f64::INFINITY;
                break;
            }
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for (q, slot) in out.iter_mut().enumerate().take(n) {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        *slot = if f[p].is_infinite() {
            f64::INFINITY
        } else {
            let d = q as f64 - p as f64;
            d * d + f[p]
        };
    }
}

/// Squared Euclidean distance (in pixels) from every pixel to the nearest set pixel.
fn squared_distance_map(seeds: &BinaryMask) -> Vec<f64> {
    let (w, h) = (seeds.width(), seeds.height());
    let mut grid: Vec<f64> = seeds
        .bits()
        .iter()
        .map(|&b| if b { 0.0 } else { f64::INFINITY })
        .collect();
    let n = w.max(h);
    let (mut f, mut out) = (vec![0.0; n], vec![0.0; n]);
    let (mut v, mut z) = (vec![0usize; n], vec![0.0; n + 1]);
    for x in 0..w {
        for y in 0..h {
            f[y] = grid[y * w + x];
        }
        edt_1d(&f[..h], &mut out[..h], &mut v, &mut z);
        for y in 0..h {
            grid[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        f[..w].copy_from_slice(&grid[y * w..(y + 1) * w]);
        edt_1d(&f[..w], &mut out[..w], &mut v, &mut z);
        grid[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
    }
    grid
}

fn directed_d95(from: &BinaryMask, to: &BinaryMask) -> Result<f64> {
    let dist = squared_distance_map(to);
    let w = from.width();
    let d: Vec<f64> = from.coords().iter().map(|&(x, y)| dist[y * w + x].sqrt()).collect();
    percentile(&d, 95.0)
}

/// Symmetric 95th-percentile boundary Hausdorff distance in millimetres.
pub fn hd95(a: &BinaryMask, b: &BinaryMask, spacing: f64) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::invalid("hd95: mask shapes differ"));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("hd95 of an empty mask"));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::invalid("pixel spacing must be positive"));
    }
    let (ba, bb) = (boundary(a), boundary(b));
    Ok(directed_d95(&ba, &bb)?.max(directed_d95(&bb, &ba)?) * spacing)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_masks_have_zero_distance() {
        let m = BinaryMask::from_fn(20, 20, |x, y| (5..12).contains(&x) && (3..15).contains(&y));
        assert_eq!(hd95(&m, &m, 0.8).unwrap(), 0.0);
    }

    #[test]
    fn single_pixels_five_apart() {
        let a = BinaryMask::from_fn(20, 20, |x, y| x == 4 && y == 7);
        let b = BinaryMask::from_fn(20, 20, |x, y| x == 9 && y == 7);
        assert!((hd95(&a, &b, 1.0).unwrap() - 5.0).abs() < 1e-12);
        assert!((hd95(&a, &b, 0.5).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn boundary_of_filled_square_is_its_ring() {
        let m = BinaryMask::from_fn(10, 10, |x, y| (2..7).contains(&x) && (2..7).contains(&y));
        assert_eq!(boundary(&m).count(), 16);
    }

    #[test]
    fn distance_map_matches_brute_force() {
        let seeds = BinaryMask::from_fn(13, 9, |x, y| (x * 7 + y * 5) % 17 == 0);
        let map = squared_distance_map(&seeds);
        let pts = seeds.coords();
        for y in 0..9 {
            for x in 0..13 {
                let brute = pts
                    .iter()
                    .map(|&(px, py)| (x as f64 - px as f64).powi(2) + (y as f64 - py as f64).powi(2))
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(map[y * 13 + x], brute, "({x},{y})");
            }
        }
    }

    #[test]
    fn empty_masks_are_invalid() {
        let a = BinaryMask::empty(5, 5);
        let b = BinaryMask::from_fn(5, 5, |x, _| x == 1);
        assert!(hd95(&a, &b, 1.0).is_err());
        assert!(hd95(&b, &a, 1.0).is_err());
    }
}
