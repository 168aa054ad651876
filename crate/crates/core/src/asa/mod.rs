//! Adaptive simulated annealing.
//!
//! Each parameter carries its own generation temperature
//! `T_i(k_i) = T0_i exp(-c_i k_i^{1/D})`; the acceptance temperature follows
//! the same law on a counter that advances once per accepted point.
//! Re-annealing periodically rescales each `k_i` from cost sensitivities at
//! the best point, so insensitive directions are searched more widely.

mod local;

pub use local::{local_refine, DEFAULT_LOCAL_CALLS};

use serde::{Deserialize, Serialize};

use crate::sampler::UniformStream;
use crate::{Error, Result};

/// `T0 exp(-c k^{1/D})`.
pub fn temperature(k: f64, t0: f64, c: f64, dimension: usize) -> f64 {
    t0 * (-c * k.powf(1.0 / dimension as f64)).exp()
}

/// Schedule constant from the ratio/anneal scales:
/// `c = -ln(ratio_scale) * exp(-ln(anneal_scale) / D)`.
pub fn schedule_constant(ratio_scale: f64, anneal_scale: f64, dimension: usize) -> f64 {
    -ratio_scale.ln() * (-(anneal_scale.ln()) / dimension as f64).exp()
}

/// Step as a fraction of the parameter range for a uniform draw `u` at
/// temperature `t`: `sgn(u - 1/2) t [(1 + 1/t)^{|2u-1|} - 1]`.
pub fn generating_step(u: f64, t: f64) -> f64 {
    let v = 2.0 * u - 1.0;
    if v == 0.0 {
        return 0.0;
    }
    v.signum() * t * ((1.0 + 1.0 / t).powf(v.abs()) - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AsaConfig {
    pub seed: u64,
    /// Initial generation temperature applied to every parameter.
    pub initial_temperature: f64,
    /// Per-parameter override of `initial_temperature`.
    pub initial_temperatures: Option<Vec<f64>>,
    pub temperature_ratio_scale: f64,
    pub temperature_anneal_scale: f64,
    /// Per-parameter override of the derived schedule constants.
    pub schedule_c: Option<Vec<f64>>,
    /// Initial acceptance temperature; sampled from the cost when absent.
    pub acceptance_temperature: Option<f64>,
    pub acceptance_c: Option<f64>,
    /// Random points used to set the acceptance temperature.
    pub cost_samples: usize,
    /// Re-anneal every this many accepted points; 0 disables.
    pub reanneal_interval: usize,
    pub k_max: f64,
    pub acceptance_window: usize,
    /// Consecutive windows with the same best cost that end the run.
    pub repeat_windows: usize,
    pub repeat_tolerance: f64,
    pub max_trials: usize,
    pub regenerate_attempts: usize,
    pub initial_point: Option<Vec<f64>>,
    /// Record (trial, cost, acceptance temperature) for every trial.
    pub trace: bool,
}

impl Default for AsaConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            initial_temperature: 1.0,
            initial_temperatures: None,
            temperature_ratio_scale: 1e-5,
            temperature_anneal_scale: 100.0,
            schedule_c: None,
            acceptance_temperature: None,
            acceptance_c: None,
            cost_samples: 5,
            reanneal_interval: 100,
            k_max: 1e12,
            acceptance_window: 100,
            repeat_windows: 2,
            repeat_tolerance: 1e-12,
            max_trials: 20_000,
            regenerate_attempts: 100,
            initial_point: None,
            trace: false,
        }
    }
}

impl AsaConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    fn check(&self, dimension: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("asa config: {what}")));
        if !(self.initial_temperature > 0.0) {
            return bad("initial_temperature must be positive");
        }
        if let Some(t) = &self.initial_temperatures {
            if t.len() != dimension || t.iter().any(|v| !(*v > 0.0)) {
                return bad("initial_temperatures must be positive, one per parameter");
            }
        }
        if let Some(c) = &self.schedule_c {
            if c.len() != dimension || c.iter().any(|v| !(*v > 0.0)) {
                return bad("schedule_c must be positive, one per parameter");
            }
        }
        if matches!(self.acceptance_c, Some(c) if !(c > 0.0)) {
            return bad("acceptance_c must be positive");
        }
        if matches!(self.acceptance_temperature, Some(t) if !(t > 0.0)) {
            return bad("acceptance_temperature must be positive");
        }
        if self.acceptance_window == 0 {
            return bad("acceptance_window must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitReason {
    Converged,
    TrialLimit,
    AcceptanceRepeat,
    /// Sampling stopped after collecting the requested accepted points.
    SampleCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub trial: usize,
    pub cost: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_point: Vec<f64>,
    pub best_cost: f64,
    pub trials: usize,
    /// Every cost evaluation, including sensitivity probes.
    pub evaluations: usize,
    pub acceptances: usize,
    pub exit_reason: ExitReason,
    /// Best cost at the end of each acceptance window.
    pub window_bests: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceRow>,
}

pub(crate) fn check_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::InvalidInput("no parameters to optimize".into()));
    }
    for (index, &(lower, upper)) in bounds.iter().enumerate() {
        if !lower.is_finite() || !upper.is_finite() || lower > upper {
            return Err(Error::InvalidBounds { index, lower, upper });
        }
    }
    Ok(())
}

pub(crate) fn in_bounds(x: &[f64], bounds: &[(f64, f64)]) -> bool {
    x.iter().zip(bounds).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
}

/// One candidate around `current`. Dimensions with zero range stay fixed;
/// out-of-range draws are regenerated, then clamped.
pub fn generate_candidate(
    current: &[f64],
    temperatures: &[f64],
    bounds: &[(f64, f64)],
    attempts: usize,
    rng: &mut UniformStream,
) -> Vec<f64> {
    current
        .iter()
        .zip(temperatures)
        .zip(bounds)
        .map(|((&x, &t), &(lo, hi))| {
            let range = hi - lo;
            if range == 0.0 {
                return lo;
            }
            for _ in 0..attempts.max(1) {
                let y = x + generating_step(rng.next_unit(), t) * range;
                if y >= lo && y <= hi {
                    return y;
                }
            }
            (x + generating_step(rng.next_unit(), t) * range).clamp(lo, hi)
        })
        .collect()
}

struct Annealer<'a, F> {
    cost: F,
    bounds: &'a [(f64, f64)],
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> f64> Annealer<'_, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        (self.cost)(x)
    }

    /// Central (or one-sided at a bound) difference of the cost.
    fn sensitivity(&mut self, x: &[f64], i: usize, fx: f64) -> f64 {
        let (lo, hi) = self.bounds[i];
        let h = 1e-4 * (hi - lo);
        if h == 0.0 {
            return 0.0;
        }
        let mut probe = x.to_vec();
        let up = (x[i] + h).min(hi);
        let down = (x[i] - h).max(lo);
        probe[i] = up;
        let f_up = if up > x[i] { self.eval(&probe) } else { fx };
        probe[i] = down;
        let f_down = if down < x[i] { self.eval(&probe) } else { fx };
        let span = up - down;
        if span <= 0.0 {
            return 0.0;
        }
        ((f_up - f_down) / span).abs()
    }
}

struct Recorder<'a> {
    points: &'a mut Vec<(Vec<f64>, f64)>,
    limit: usize,
}

fn anneal<F: FnMut(&[f64]) -> f64>(
    cost: F,
    bounds: &[(f64, f64)],
    cfg: &AsaConfig,
    mut recorder: Option<Recorder<'_>>,
) -> Result<OptResult> {
    check_bounds(bounds)?;
    let dim = bounds.len();
    cfg.check(dim)?;
    let mut rng = UniformStream::new(cfg.seed, 0);
    let mut run = Annealer { cost, bounds, evaluations: 0 };

    let t0: Vec<f64> = cfg.initial_temperatures.clone().unwrap_or_else(|| vec![cfg.initial_temperature; dim]);
    let default_c = schedule_constant(cfg.temperature_ratio_scale, cfg.temperature_anneal_scale, dim);
    let c: Vec<f64> = cfg.schedule_c.clone().unwrap_or_else(|| vec![default_c; dim]);
    let acc_c = cfg.acceptance_c.unwrap_or(default_c);

    let mut current: Vec<f64> = match &cfg.initial_point {
        Some(p) => {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: p.len() });
            }
            if !in_bounds(p, bounds) {
                return Err(Error::InvalidInput("initial point outside bounds".into()));
            }
            p.clone()
        }
        None => bounds.iter().map(|&(lo, hi)| lo + rng.next_unit() * (hi - lo)).collect(),
    };
    let mut current_cost = run.eval(&current);
    if !current_cost.is_finite() {
        return Err(Error::CostNotFinite);
    }
    let mut best = current.clone();
    let mut best_cost = current_cost;
    let mut trials = 1usize;

    let acc_t0 = match cfg.acceptance_temperature {
        Some(t) => t,
        None => {
            let mut total = current_cost.abs();
            let mut counted = 1usize;
            for _ in 0..cfg.cost_samples {
                let x: Vec<f64> = bounds.iter().map(|&(lo, hi)| lo + rng.next_unit() * (hi - lo)).collect();
                let fx = run.eval(&x);
                trials += 1;
                if fx.is_finite() {
                    total += fx.abs();
                    counted += 1;
                    if fx < best_cost {
                        best_cost = fx;
                        best = x;
                    }
                }
            }
            let t = total / counted as f64;
            if t > 0.0 {
                t
            } else {
                1.0
            }
        }
    };

    let mut trace = Vec::new();
    if cfg.trace {
        trace.push(TraceRow { trial: 0, cost: current_cost, temperature: acc_t0 });
    }

    let mut k_gen = vec![0.0f64; dim];
    let mut k_acc = 0.0f64;
    let mut acceptances = 0usize;
    let mut window_bests = Vec::new();
    let mut exit_reason = ExitReason::TrialLimit;
    let mut temps = t0.clone();

    'outer: while trials < cfg.max_trials {
        for i in 0..dim {
            k_gen[i] += 1.0;
            temps[i] = temperature(k_gen[i], t0[i], c[i], dim);
        }
        let candidate = generate_candidate(&current, &temps, bounds, cfg.regenerate_attempts, &mut rng);
        let fc = run.eval(&candidate);
        trials += 1;
        let acc_temp = temperature(k_acc, acc_t0, acc_c, dim);
        let u = rng.next_unit();
        if cfg.trace {
            trace.push(TraceRow { trial: trials - 1, cost: fc, temperature: acc_temp });
        }
        if !fc.is_finite() {
            continue;
        }
        let delta = fc - current_cost;
        let accept = delta <= 0.0 || u < (-delta / acc_temp).exp();
        if !accept {
            continue;
        }
        current = candidate;
        current_cost = fc;
        acceptances += 1;
        k_acc += 1.0;
        if fc < best_cost {
            best_cost = fc;
            best = current.clone();
        }
        if let Some(rec) = recorder.as_mut() {
            rec.points.push((current.clone(), current_cost));
            if rec.points.len() >= rec.limit {
                exit_reason = ExitReason::SampleCount;
                break 'outer;
            }
        }

        if cfg.reanneal_interval > 0 && acceptances.is_multiple_of(cfg.reanneal_interval) {
            let sens: Vec<f64> = (0..dim).map(|i| run.sensitivity(&best, i, best_cost)).collect();
            let s_max = sens.iter().cloned().filter(|s| s.is_finite()).fold(0.0, f64::max);
            if s_max > 0.0 {
                for i in 0..dim {
                    let s = sens[i];
                    if !(s > 0.0) || !s.is_finite() {
                        continue;
                    }
                    let target = temps[i] * (s_max / s);
                    let k = if target >= t0[i] { 1.0 } else { ((t0[i] / target).ln() / c[i]).powi(dim as i32) };
                    k_gen[i] = k.clamp(1.0, cfg.k_max);
                }
            }
        }

        if acceptances.is_multiple_of(cfg.acceptance_window) {
            window_bests.push(best_cost);
            let w = cfg.repeat_windows;
            if recorder.is_none() && w >= 2 && window_bests.len() >= w {
                let tail = &window_bests[window_bests.len() - w..];
                let first = tail[0];
                if tail.iter().all(|b| (b - first).abs() <= cfg.repeat_tolerance) {
                    exit_reason = ExitReason::AcceptanceRepeat;
                    break;
                }
            }
        }
    }

    Ok(OptResult {
        best_point: best,
        best_cost,
        trials,
        evaluations: run.evaluations,
        acceptances,
        exit_reason,
        window_bests,
        trace,
    })
}

/// Minimize a deterministic cost over a box.
///
/// Non-finite costs at trial points reject the trial; a non-finite cost at
/// the initial point is an error.
pub fn minimize<F: FnMut(&[f64]) -> f64>(cost: F, bounds: &[(f64, f64)], cfg: &AsaConfig) -> Result<OptResult> {
    anneal(cost, bounds, cfg, None)
}

/// Simulated annealing followed by [`local_refine`] from the best point.
pub fn minimize_with_refine<F: FnMut(&[f64]) -> f64>(
    mut cost: F,
    bounds: &[(f64, f64)],
    cfg: &AsaConfig,
    local_calls: usize,
) -> Result<OptResult> {
    let global = anneal(&mut cost, bounds, cfg, None)?;
    let polished = local_refine(&mut cost, &global.best_point, bounds, local_calls)?;
    Ok(if polished.best_cost < global.best_cost {
        OptResult {
            best_point: polished.best_point,
            best_cost: polished.best_cost,
            evaluations: global.evaluations + polished.evaluations,
            ..global
        }
    } else {
        OptResult { evaluations: global.evaluations + polished.evaluations, ..global }
    })
}

/// Accepted trajectory of an annealing run on `-log_density`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceSample {
    pub points: Vec<Vec<f64>>,
    /// `-log_density` at each point.
    pub costs: Vec<f64>,
    pub acceptance_rate: f64,
    pub run: OptResult,
}

/// Record up to `n` accepted points of an annealing run over
/// `cost = -log_density`. The acceptance-repeat exit is disabled so the
/// run continues until `n` points or the trial limit.
pub fn importance_sample<F: FnMut(&[f64]) -> f64>(
    mut log_density: F,
    bounds: &[(f64, f64)],
    cfg: &AsaConfig,
    n: usize,
) -> Result<ImportanceSample> {
    let mut points = Vec::with_capacity(n);
    let run =
        anneal(|x: &[f64]| -log_density(x), bounds, cfg, Some(Recorder { points: &mut points, limit: n.max(1) }))?;
    let acceptance_rate = run.acceptances as f64 / (run.trials.max(1)) as f64;
    let (points, costs) = points.into_iter().unzip();
    Ok(ImportanceSample { points, costs, acceptance_rate, run })
}
