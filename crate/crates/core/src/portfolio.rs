//! Portfolio returns, their fitted two-tailed shape, and VaR tail measures.

use std::cell::RefCell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asa::{self, AsaConfig, OptResult};
use crate::marginal::{fit_asymmetric, fit_exponential, AsymmetricWidths};
use crate::sampler::EventBatch;
use crate::stats::{mean, pairwise_sum};
use crate::{Error, Result};

pub const DEFAULT_VAR: f64 = 0.05;
pub const DEFAULT_Q_TARGET: f64 = 0.01;
pub const DEFAULT_TOLERANCE: f64 = 0.002;
pub const DEFAULT_PENALTY: f64 = 1e3;
pub const DEFAULT_BIN_COUNT: usize = 201;
/// Half-width of the binned range in units of X.
pub const BIN_SPAN: f64 = 12.0;
pub const MIN_FIT_SAMPLES: usize = 100;

/// `dM = sum_j (a_j dx_j + b_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearWeights {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Contract holdings over one epoch. Forecast prices are `p (1 + dx)`;
/// entry prices are held fixed across the epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractPositions {
    /// Contracts held at the start of the epoch (signed).
    pub contracts_prev: Vec<f64>,
    /// Contracts held at its end; these are the optimized quantities.
    pub contracts: Vec<f64>,
    pub prices: Vec<f64>,
    pub entry_prices: Vec<f64>,
    /// Dollars available at the start of the epoch.
    pub capital: f64,
    /// Dollars available at the end; equal to `capital` when absent.
    #[serde(default)]
    pub capital_next: Option<f64>,
    /// Dollars lost per contract changed.
    #[serde(default)]
    pub slippage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum PortfolioSpec {
    Linear(LinearWeights),
    Contract(ContractPositions),
}

impl LinearWeights {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), actual: b.len() });
        }
        Ok(Self { a, b })
    }

    /// Unit weight on channel `j` of `n`.
    pub fn unit(n: usize, j: usize) -> Self {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        Self { a, b: vec![0.0; n] }
    }
}

impl ContractPositions {
    fn check(&self) -> Result<()> {
        let n = self.contracts.len();
        for len in [self.contracts_prev.len(), self.prices.len(), self.entry_prices.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, actual: len });
            }
        }
        if !(self.capital > 0.0) || self.capital_next.is_some_and(|y| !(y > 0.0)) {
            return Err(Error::InvalidInput("available capital must be positive".into()));
        }
        Ok(())
    }

    fn held_value(nc: f64, price: f64, entry: f64) -> f64 {
        nc.signum() * nc * (price - entry)
    }

    /// `K_{t'} = Y_{t'} + sum sgn(NC) NC (p - p@)`.
    pub fn current_capital(&self) -> f64 {
        self.capital
            + (0..self.contracts_prev.len())
                .map(|i| Self::held_value(self.contracts_prev[i], self.prices[i], self.entry_prices[i]))
                .sum::<f64>()
    }

    /// `K_t` for one forecast row of fractional price moves.
    pub fn forecast_capital(&self, dx: &[f64]) -> f64 {
        let mut k = self.capital_next.unwrap_or(self.capital);
        for i in 0..self.contracts.len() {
            let p = self.prices[i] * (1.0 + dx[i]);
            let change = self.contracts[i] - self.contracts_prev[i];
            k += Self::held_value(self.contracts[i], p, self.entry_prices[i]) - self.slippage * change.abs();
        }
        k
    }
}

impl PortfolioSpec {
    pub fn dimension(&self) -> usize {
        match self {
            PortfolioSpec::Linear(w) => w.a.len(),
            PortfolioSpec::Contract(c) => c.contracts.len(),
        }
    }

    /// Optimized coordinates: `a` for linear weights, `NC_t` for contracts.
    pub fn positions(&self) -> &[f64] {
        match self {
            PortfolioSpec::Linear(w) => &w.a,
            PortfolioSpec::Contract(c) => &c.contracts,
        }
    }

    pub fn with_positions(&self, x: &[f64]) -> Self {
        let mut out = self.clone();
        match &mut out {
            PortfolioSpec::Linear(w) => w.a.copy_from_slice(x),
            PortfolioSpec::Contract(c) => c.contracts.copy_from_slice(x),
        }
        out
    }
}

fn check_events(events: &EventBatch, dim: usize) -> Result<()> {
    if events.dimension() != dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: events.dimension() });
    }
    Ok(())
}

pub fn portfolio_returns(events: &EventBatch, weights: &LinearWeights) -> Result<Vec<f64>> {
    let n = weights.a.len();
    if weights.b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: weights.b.len() });
    }
    check_events(events, n)?;
    let offset: f64 = weights.b.iter().sum();
    Ok((0..events.len())
        .into_par_iter()
        .map(|i| {
            let row = events.dx.row(i);
            row.iter().zip(&weights.a).map(|(x, a)| a * x).sum::<f64>() + offset
        })
        .collect())
}

/// `dM = (K_t - K_{t'}) / K_{t'}` for each event.
pub fn returns_from_contracts(events: &EventBatch, positions: &ContractPositions) -> Result<Vec<f64>> {
    positions.check()?;
    check_events(events, positions.contracts.len())?;
    let k0 = positions.current_capital();
    if k0 == 0.0 {
        return Err(Error::ZeroCapital);
    }
    Ok((0..events.len()).into_par_iter().map(|i| (positions.forecast_capital(events.dx.row(i)) - k0) / k0).collect())
}

pub fn returns(events: &EventBatch, spec: &PortfolioSpec) -> Result<Vec<f64>> {
    match spec {
        PortfolioSpec::Linear(w) => portfolio_returns(events, w),
        PortfolioSpec::Contract(c) => returns_from_contracts(events, c),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioDistribution {
    /// Samples in ascending order.
    pub samples: Vec<f64>,
    pub bins: Vec<Bin>,
    /// `m_M = <dM>`.
    pub mean: f64,
    /// `2 X^2 = <dM^2> - <dM>^2`.
    pub width: f64,
    /// One-sided widths about `mean`; absent when a side is empty.
    pub widths: Option<AsymmetricWidths>,
}

impl PortfolioDistribution {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn q_analytic(&self, var: f64) -> f64 {
        q_analytic(self.width, self.mean, var)
    }
}

/// Fit `m_M`, `X` from raw sample moments and bin the samples over
/// `m_M +- 12 X`. Samples beyond the range land in the edge bins.
pub fn fit_bins(samples: &[f64], bin_count: usize) -> Result<PortfolioDistribution> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::DegenerateData(format!("need at least {MIN_FIT_SAMPLES} samples, got {}", samples.len())));
    }
    if bin_count == 0 {
        return Err(Error::InvalidInput("bin count must be positive".into()));
    }
    let fit = fit_exponential(samples)?;
    let widths = fit_asymmetric(samples).ok().and_then(|f| f.widths());
    let (m, x) = (fit.mean(), fit.chi());
    let lo = m - BIN_SPAN * x;
    let step = 2.0 * BIN_SPAN * x / bin_count as f64;
    let mut bins: Vec<Bin> = (0..bin_count)
        .map(|i| Bin {
            low: lo + i as f64 * step,
            high: if i + 1 == bin_count { m + BIN_SPAN * x } else { lo + (i + 1) as f64 * step },
            count: 0,
        })
        .collect();
    for &v in samples {
        let idx = ((v - lo) / step).floor();
        let idx = if idx < 0.0 { 0 } else { (idx as usize).min(bin_count - 1) };
        bins[idx].count += 1;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(PortfolioDistribution { samples: sorted, bins, mean: m, width: x, widths })
}

/// `Q = 1/2 exp(-|(-|VaR|) - m_M| / X)`.
pub fn q_analytic(width: f64, mean: f64, var: f64) -> f64 {
    0.5 * (-(-var.abs() - mean).abs() / width).exp()
}

/// Width implied by fixing `Q`, `VaR` and `m_M`.
pub fn implied_width(q: f64, mean: f64, var: f64) -> f64 {
    (-var.abs() - mean).abs() / (0.5 / q).ln()
}

/// Fraction of samples strictly below `-|VaR|`.
pub fn q_empirical(samples: &[f64], var: f64) -> f64 {
    let threshold = -var.abs();
    samples.iter().filter(|&&v| v < threshold).count() as f64 / samples.len() as f64
}

/// Mean of the samples below `-|VaR|`, or `None` for an empty tail.
pub fn etl(samples: &[f64], var: f64) -> Option<f64> {
    let threshold = -var.abs();
    let tail: Vec<f64> = samples.iter().copied().filter(|&v| v < threshold).collect();
    if tail.is_empty() {
        None
    } else {
        Some(mean(&tail))
    }
}

/// Tail mean of the fitted shape, valid whenever `m_M > -|VaR|`: the
/// exponential tail is memoryless, so the mean sits `X` past the threshold.
pub fn etl_analytic(width: f64, var: f64) -> f64 {
    -(var.abs() + width)
}

pub fn cost_q(q: f64, target: f64) -> f64 {
    (q - target).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub var: f64,
    /// Empirical tail probability.
    pub q: f64,
    pub q_empirical: f64,
    pub q_analytic: f64,
    pub etl: Option<f64>,
    pub mean: f64,
    pub width: f64,
    pub cost_q: f64,
    pub samples: usize,
}

pub fn risk_report(dist: &PortfolioDistribution, var: f64, q_target: f64) -> RiskReport {
    let q_emp = q_empirical(&dist.samples, var);
    RiskReport {
        var,
        q: q_emp,
        q_empirical: q_emp,
        q_analytic: dist.q_analytic(var),
        etl: etl(&dist.samples, var),
        mean: dist.mean,
        width: dist.width,
        cost_q: cost_q(q_emp, q_target),
        samples: dist.len(),
    }
}

/// How `Q` is measured inside the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QEstimator {
    /// Fraction of events in the tail.
    #[default]
    Empirical,
    /// Analytic tail mass of the moment-fitted shape.
    Fitted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskConfig {
    pub var: f64,
    pub q_target: f64,
    pub tolerance: f64,
    pub penalty: f64,
    pub estimator: QEstimator,
    pub bin_count: usize,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            var: DEFAULT_VAR,
            q_target: DEFAULT_Q_TARGET,
            tolerance: DEFAULT_TOLERANCE,
            penalty: DEFAULT_PENALTY,
            estimator: QEstimator::Empirical,
            bin_count: DEFAULT_BIN_COUNT,
        }
    }
}

/// One evaluation of the penalized position cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionCost {
    pub objective: f64,
    pub q: f64,
    pub cost_q: f64,
    pub total: f64,
}

impl RiskConfig {
    fn measure_q(&self, samples: &[f64]) -> f64 {
        match self.estimator {
            QEstimator::Empirical => q_empirical(samples, self.var),
            QEstimator::Fitted => match fit_exponential(samples) {
                Ok(f) => q_analytic(f.chi(), f.mean(), self.var),
                // a constant return has no tail
                Err(_) => {
                    if mean(samples) < -self.var.abs() {
                        1.0
                    } else {
                        0.0
                    }
                }
            },
        }
    }

    /// `-mean(dM) + penalty * |Q - Q_target|`.
    pub fn position_cost(&self, events: &EventBatch, spec: &PortfolioSpec) -> Result<PositionCost> {
        let dm = returns(events, spec)?;
        let objective = -pairwise_sum(&dm) / dm.len() as f64;
        let q = self.measure_q(&dm);
        let cq = cost_q(q, self.q_target);
        Ok(PositionCost { objective, q, cost_q: cq, total: objective + self.penalty * cq })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionFit {
    pub spec: PortfolioSpec,
    pub cost: PositionCost,
    pub feasible: bool,
    pub run: OptResult,
}

/// Anneal the positions of `template` within `bounds`. Always returns the
/// best point found, preferring points whose `cost_q` is within tolerance.
pub fn optimize_positions_report(
    events: &EventBatch,
    template: &PortfolioSpec,
    bounds: &[(f64, f64)],
    risk: &RiskConfig,
    asa_cfg: &AsaConfig,
) -> Result<PositionFit> {
    let dim = template.dimension();
    if bounds.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: bounds.len() });
    }
    check_events(events, dim)?;
    // surface spec errors before annealing
    risk.position_cost(events, template)?;

    let feasible_best: RefCell<Option<(Vec<f64>, f64)>> = RefCell::new(None);
    let evaluate = |x: &[f64]| -> f64 {
        match risk.position_cost(events, &template.with_positions(x)) {
            Ok(c) => {
                if c.cost_q < risk.tolerance {
                    let mut slot = feasible_best.borrow_mut();
                    if slot.as_ref().is_none_or(|(_, t)| c.total < *t) {
                        *slot = Some((x.to_vec(), c.total));
                    }
                }
                c.total
            }
            Err(_) => f64::NAN,
        }
    };
    let run = asa::minimize(evaluate, bounds, asa_cfg)?;
    let point = match feasible_best.into_inner() {
        Some((x, _)) => x,
        None => run.best_point.clone(),
    };
    let spec = template.with_positions(&point);
    let cost = risk.position_cost(events, &spec)?;
    Ok(PositionFit { feasible: cost.cost_q < risk.tolerance, spec, cost, run })
}

/// As [`optimize_positions_report`], failing when no sampled point met the
/// `Q` tolerance.
pub fn optimize_positions(
    events: &EventBatch,
    template: &PortfolioSpec,
    bounds: &[(f64, f64)],
    risk: &RiskConfig,
    asa_cfg: &AsaConfig,
) -> Result<PositionFit> {
    let fit = optimize_positions_report(events, template, bounds, risk, asa_cfg)?;
    if fit.feasible {
        Ok(fit)
    } else {
        Err(Error::ConstraintUnsatisfiable { cost_q: fit.cost.cost_q, tolerance: risk.tolerance })
    }
}
