//! Bound-constrained BFGS polish with finite-difference gradients.

use super::{check_bounds, in_bounds, ExitReason, OptResult};
use crate::{Error, Result};

pub const DEFAULT_LOCAL_CALLS: usize = 1000;

const GRAD_TOL: f64 = 1e-8;

struct Counted<'a, F> {
    cost: &'a mut F,
    calls: usize,
    limit: usize,
    best: Vec<f64>,
    best_cost: f64,
}

impl<F: FnMut(&[f64]) -> f64> Counted<'_, F> {
    fn exhausted(&self) -> bool {
        self.calls >= self.limit
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        self.calls += 1;
        let v = (self.cost)(x);
        let v = if v.is_finite() { v } else { f64::INFINITY };
        if v < self.best_cost {
            self.best_cost = v;
            self.best = x.to_vec();
        }
        v
    }
}

fn step_size(x: f64, lo: f64, hi: f64) -> f64 {
    let h = 1e-6 * (1.0 + x.abs());
    h.min(0.25 * (hi - lo))
}

/// Central differences, one-sided when a bound is within a step.
fn gradient<F: FnMut(&[f64]) -> f64>(f: &mut Counted<'_, F>, x: &[f64], fx: f64, bounds: &[(f64, f64)]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let (lo, hi) = bounds[i];
        if hi == lo {
            continue;
        }
        let h = step_size(x[i], lo, hi);
        let up = x[i] + h;
        let down = x[i] - h;
        g[i] = if up <= hi && down >= lo {
            probe[i] = up;
            let a = f.eval(&probe);
            probe[i] = down;
            let b = f.eval(&probe);
            (a - b) / (up - down)
        } else if up <= hi {
            probe[i] = up;
            (f.eval(&probe) - fx) / (up - x[i])
        } else {
            probe[i] = down;
            (fx - f.eval(&probe)) / (x[i] - down)
        };
        probe[i] = x[i];
    }
    g
}

/// Zero the components that would push through an active bound.
fn free_mask(x: &[f64], g: &[f64], bounds: &[(f64, f64)]) -> Vec<bool> {
    x.iter()
        .zip(g)
        .zip(bounds)
        .map(|((&xi, &gi), &(lo, hi))| hi > lo && !((xi <= lo && gi > 0.0) || (xi >= hi && gi < 0.0)))
        .collect()
}

fn project(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Quasi-Newton descent from `start`, never returning a cost above the
/// start's. Non-finite costs count as `+inf`. Stops when the projected
/// gradient norm drops below `1e-8 (1 + |cost|)` or after `max_calls`
/// evaluations.
pub fn local_refine<F: FnMut(&[f64]) -> f64>(
    mut cost: F,
    start: &[f64],
    bounds: &[(f64, f64)],
    max_calls: usize,
) -> Result<OptResult> {
    check_bounds(bounds)?;
    if start.len() != bounds.len() {
        return Err(Error::DimensionMismatch { expected: bounds.len(), actual: start.len() });
    }
    if !in_bounds(start, bounds) {
        return Err(Error::InvalidInput("start point outside bounds".into()));
    }
    let n = start.len();
    let mut f =
        Counted { cost: &mut cost, calls: 0, limit: max_calls.max(1), best: start.to_vec(), best_cost: f64::INFINITY };
    let mut x = start.to_vec();
    let mut fx = f.eval(&x);
    let mut exit = ExitReason::TrialLimit;
    let mut h_inv = identity(n);
    let mut fresh = true;

    if fx.is_finite() {
        let mut g = gradient(&mut f, &x, fx, bounds);
        while !f.exhausted() {
            let free = free_mask(&x, &g, bounds);
            let pg_norm = g.iter().zip(&free).filter(|(_, &fr)| fr).map(|(v, _)| v * v).sum::<f64>().sqrt();
            if pg_norm < GRAD_TOL * (1.0 + fx.abs()) {
                exit = ExitReason::Converged;
                break;
            }
            let mut d = vec![0.0; n];
            for i in 0..n {
                if !free[i] {
                    continue;
                }
                for j in 0..n {
                    if free[j] {
                        d[i] -= h_inv[i][j] * g[j];
                    }
                }
            }
            let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                h_inv = identity(n);
                fresh = true;
                for i in 0..n {
                    d[i] = if free[i] { -g[i] } else { 0.0 };
                }
                slope = -pg_norm * pg_norm;
            }
            if fresh {
                // keep the first step inside a tenth of the box
                let longest = d
                    .iter()
                    .zip(bounds)
                    .map(|(di, (lo, hi))| if hi > lo { di.abs() / (hi - lo) } else { 0.0 })
                    .fold(0.0, f64::max);
                if longest > 0.1 {
                    let s = 0.1 / longest;
                    d.iter_mut().for_each(|v| *v *= s);
                    slope *= s;
                }
            }

            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                if f.exhausted() {
                    break;
                }
                let mut trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
                project(&mut trial, bounds);
                if trial == x {
                    break;
                }
                let ft = f.eval(&trial);
                if ft <= fx + 1e-4 * alpha * slope || (ft < fx && alpha < 1e-3) {
                    accepted = Some((trial, ft));
                    break;
                }
                alpha *= 0.5;
            }
            let Some((x_new, f_new)) = accepted else {
                if fresh {
                    exit = ExitReason::Converged;
                    break;
                }
                h_inv = identity(n);
                fresh = true;
                continue;
            };
            if f.exhausted() {
                break;
            }
            let g_new = gradient(&mut f, &x_new, f_new, bounds);
            let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
            let yy: f64 = y.iter().map(|v| v * v).sum();
            let ss: f64 = s.iter().map(|v| v * v).sum();
            if sy > 1e-12 * (ss * yy).sqrt() && sy > 0.0 {
                if fresh {
                    let scale = sy / yy;
                    for (i, row) in h_inv.iter_mut().enumerate() {
                        row.iter_mut().for_each(|v| *v = 0.0);
                        row[i] = scale;
                    }
                }
                bfgs_update(&mut h_inv, &s, &y, sy);
                fresh = false;
            }
            let improvement = fx - f_new;
            x = x_new;
            fx = f_new;
            g = g_new;
            if improvement <= f64::EPSILON * fx.abs() && improvement >= 0.0 && !fresh {
                // stalled at roundoff: one more pass with a clean metric
                h_inv = identity(n);
                fresh = true;
            }
        }
    }

    let evaluations = f.calls;
    let (best_point, best_cost) = (f.best, f.best_cost);
    Ok(OptResult {
        best_point,
        best_cost,
        trials: evaluations,
        evaluations,
        acceptances: 0,
        exit_reason: exit,
        window_bests: Vec::new(),
        trace: Vec::new(),
    })
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// `H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i][j] * y[j]).sum()).collect();
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
