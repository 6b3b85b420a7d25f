//! Small descriptive statistics shared across modules.

use crate::error::{Error, Result};

/// Percentile `q` (in [0, 100]) with linear interpolation between closest ranks:
/// position `h = (n - 1) q / 100` into the sorted sample.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    let mut sorted = values.to_vec();
    sort_finite(&mut sorted)?;
    percentile_sorted(&sorted, q)
}

/// Several percentiles of one sample, sorting once.
pub fn percentiles(values: &[f64], qs: &[f64]) -> Result<Vec<f64>> {
    let mut sorted = values.to_vec();
    sort_finite(&mut sorted)?;
    qs.iter().map(|&q| percentile_sorted(&sorted, q)).collect()
}

pub fn median(values: &[f64]) -> Result<f64> {
    percentile(values, 50.0)
}

pub(crate) fn sort_finite(values: &mut [f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("percentile of non-finite sample"));
    }
    values.sort_by(|a, b| a.total_cmp(b));
    Ok(())
}

pub(crate) fn percentile_sorted(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::invalid("percentile of empty sample"));
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::invalid(format!("percentile {q} outside [0, 100]")));
    }
    let h = (sorted.len() - 1) as f64 * q / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Coefficient of determination `1 - SSE/SST`.
///
/// Constant observations have no variance to explain: the result is 1 for a
/// perfect match and 0 otherwise.
pub fn r_squared(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    if observed.len() != predicted.len() || observed.is_empty() {
        return Err(Error::invalid("r_squared needs equal-length, nonempty samples"));
    }
    let n = observed.len() as f64;
    let mean = observed.iter().sum::<f64>() / n;
    let sse: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(o, p)| (o - p).powi(2))
        .sum();
    let sst: f64 = observed.iter().map(|o| (o - mean).powi(2)).sum();
    let scale = observed.iter().map(|o| o * o).sum::<f64>().max(f64::MIN_POSITIVE);
    if sst <= 1e-24 * scale {
        return Ok(if sse <= 1e-20 * scale { 1.0 } else { 0.0 });
    }
    Ok(1.0 - sse / sst)
}
