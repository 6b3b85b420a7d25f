//! Box-constrained Levenberg-Marquardt.
//!
//! Bounds are enforced by reparameterising every free coordinate through a
//! logistic map `θ = lo + (hi - lo) · σ(u)` and running unconstrained LM in `u`.
//! Coordinates with `lo == hi` are held fixed.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the SSE by less than this fraction.
    pub rel_tol: f64,
    /// Stop once an accepted step moves every parameter by less than this
    /// fraction of its bound width.
    pub step_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 500, rel_tol: 1e-10, step_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub sse: f64,
    pub converged: bool,
    pub iterations: usize,
}

// Keeps σ(u) away from exactly 0 or 1 so the map stays invertible.
const EDGE: f64 = 1e-9;
const FD_STEP: f64 = 1e-6;

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

struct Transform {
    lo: Vec<f64>,
    hi: Vec<f64>,
    free: Vec<usize>,
}

impl Transform {
    fn to_params(&self, u: &[f64], base: &mut [f64]) {
        for (k, &i) in self.free.iter().enumerate() {
            base[i] = self.lo[i] + (self.hi[i] - self.lo[i]) * logistic(u[k]);
        }
    }

    /// Largest move between two internal points, as a fraction of bound width.
    fn relative_move(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(&x, &y)| (logistic(x) - logistic(y)).abs()).fold(0.0, f64::max)
    }

    fn to_internal(&self, x: &[f64]) -> Vec<f64> {
        self.free
            .iter()
            .map(|&i| {
                let frac = ((x[i] - self.lo[i]) / (self.hi[i] - self.lo[i])).clamp(EDGE, 1.0 - EDGE);
                (frac / (1.0 - frac)).ln()
            })
            .collect()
    }
}

/// Minimises `Σ r_i(θ)²` subject to `lo ≤ θ ≤ hi`.
///
/// `residuals(θ, out)` fills `out` (length `n_residuals`). Non-finite residuals
/// are treated as an infinitely bad point. The starting point is clamped into
/// the open box.
pub fn minimize_bounded<F>(
    residuals: F,
    start: &[f64],
    lo: &[f64],
    hi: &[f64],
    n_residuals: usize,
    opts: &LmOptions,
) -> LmOutcome
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = start.len();
    assert!(lo.len() == n && hi.len() == n, "bound dimension mismatch");
    let free: Vec<usize> = (0..n).filter(|&i| hi[i] > lo[i]).collect();
    let tf = Transform { lo: lo.to_vec(), hi: hi.to_vec(), free };
    let mut params: Vec<f64> = start
        .iter()
        .zip(lo.iter().zip(hi))
        .map(|(&x, (&l, &h))| x.clamp(l, h))
        .collect();
    let mut u = tf.to_internal(&params);
    tf.to_params(&u, &mut params);

    let mut scratch = params.clone();
    let mut r = vec![0.0; n_residuals];
    let eval = |u: &[f64], scratch: &mut Vec<f64>, r: &mut [f64]| -> f64 {
        tf.to_params(u, scratch);
        residuals(scratch, r);
        let sse: f64 = r.iter().map(|v| v * v).sum();
        if sse.is_finite() {
            sse
        } else {
            f64::INFINITY
        }
    };

    let mut sse = eval(&u, &mut scratch, &mut r);
    let m = tf.free.len();
    if m == 0 || !sse.is_finite() {
        return LmOutcome { params, sse, converged: m == 0 && sse.is_finite(), iterations: 0 };
    }

    let mut mu: Option<f64> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut jac = DMatrix::<f64>::zeros(n_residuals, m);
    let mut r_plus = vec![0.0; n_residuals];
    let mut r_minus = vec![0.0; n_residuals];
    let mut trial_r = vec![0.0; n_residuals];

    'outer: while iterations < opts.max_iterations {
        iterations += 1;
        // Central-difference Jacobian in the unconstrained coordinates.
        let mut probe = u.clone();
        for k in 0..m {
            let h = FD_STEP * u[k].abs().max(1.0);
            probe[k] = u[k] + h;
            let fp = eval(&probe, &mut scratch, &mut r_plus);
            probe[k] = u[k] - h;
            let fm = eval(&probe, &mut scratch, &mut r_minus);
            probe[k] = u[k];
            for i in 0..n_residuals {
                jac[(i, k)] = if fp.is_finite() && fm.is_finite() {
                    (r_plus[i] - r_minus[i]) / (2.0 * h)
                } else {
                    0.0
                };
            }
        }
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * rv;
        let max_diag = (0..m).map(|k| jtj[(k, k)]).fold(0.0, f64::max);
        if max_diag <= 0.0 || grad.amax() <= 1e-300 {
            converged = true;
            break;
        }
        let damping_floor = 1e-12 * max_diag;
        let mut lambda = *mu.get_or_insert(1e-3);

        loop {
            let mut a = jtj.clone();
            for k in 0..m {
                a[(k, k)] += lambda * jtj[(k, k)].max(damping_floor);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lambda *= 10.0;
                    if lambda > 1e20 {
                        break 'outer;
                    }
                    continue;
                }
            };
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let trial_sse = eval(&trial, &mut scratch, &mut trial_r);
            if trial_sse < sse {
                let drop = sse - trial_sse;
                let moved = tf.relative_move(&u, &trial);
                u = trial;
                std::mem::swap(&mut r, &mut trial_r);
                let previous = sse;
                sse = trial_sse;
                mu = Some((lambda / 3.0).max(1e-12));
                if drop <= opts.rel_tol * previous || moved <= opts.step_tol || sse == 0.0 {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e20 {
                // No descent direction left at working precision: a stationary point.
                converged = true;
                break 'outer;
            }
        }
    }

    tf.to_params(&u, &mut params);
    LmOutcome { params, sse, converged, iterations }
}
