//! Portfolios of indicator streams from different collection methods.
//!
//! Streams are split in time: the first half fits marginals, the copula and
//! the combination weights; the second half scores them.

use serde::{Deserialize, Serialize};

use crate::asa::{self, AsaConfig};
use crate::copula::{estimate_correlation, CorrelationMatrix, DEFAULT_PRE_AVERAGE};
use crate::marginal::{fit_exponential, ExponentialMarginal};
use crate::stats::pairwise_sum;
use crate::{Error, Result};

/// Bhattacharyya coefficient `int sqrt(p q)` of two two-tailed exponential
/// densities with means `m` and widths `x`.
pub fn bhattacharyya(m1: f64, x1: f64, m2: f64, x2: f64) -> f64 {
    let ((m1, x1), (m2, x2)) = if m1 <= m2 { ((m1, x1), (m2, x2)) } else { ((m2, x2), (m1, x1)) };
    let alpha = 0.5 / x1;
    let beta = 0.5 / x2;
    let d = m2 - m1;
    // left of m1 and right of m2 both decay at alpha + beta
    let outer = ((-beta * d).exp() + (-alpha * d).exp()) / (alpha + beta);
    // between the means the integrand is exp(-alpha (t - m1) - beta (m2 - t))
    let inner = if (beta - alpha).abs() <= 1e-12 * alpha.max(beta) {
        d * (-alpha * d).exp()
    } else {
        ((-alpha * d).exp() - (-beta * d).exp()) / (beta - alpha)
    };
    (outer + inner) / (2.0 * (x1 * x2).sqrt())
}

/// Pairwise overlaps of fitted `(mean, width)` shapes.
pub fn overlap_matrix(shapes: &[(f64, f64)]) -> Vec<Vec<f64>> {
    shapes.iter().map(|&(m1, x1)| shapes.iter().map(|&(m2, x2)| bhattacharyya(m1, x1, m2, x2)).collect()).collect()
}

/// Mean log density of `held` under the unit two-tailed exponential after
/// standardizing by the shape fitted to `train`. Invariant to a common
/// rescaling of both series.
pub fn standardized_score(train: &[f64], held: &[f64]) -> Result<f64> {
    let fit = fit_exponential(train)?;
    let terms: Vec<f64> = held.iter().map(|v| -std::f64::consts::LN_2 - ((v - fit.mean()) / fit.chi()).abs()).collect();
    Ok(pairwise_sum(&terms) / held.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndicatorConfig {
    pub pre_average: usize,
    pub fit_weights: bool,
    /// Box applied to every weight.
    pub weight_bounds: (f64, f64),
    pub asa: AsaConfig,
    /// Final-window improvement below which the fit is reported flat.
    pub flat_tolerance: f64,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        Self {
            pre_average: DEFAULT_PRE_AVERAGE,
            fit_weights: true,
            weight_bounds: (-1.0, 1.0),
            asa: AsaConfig::default(),
            flat_tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorReport {
    pub names: Vec<String>,
    pub train_epochs: usize,
    pub held_epochs: usize,
    pub marginals: Vec<ExponentialMarginal>,
    /// Absent when the streams are too close to collinear.
    pub correlation: Option<CorrelationMatrix>,
    pub degenerate_pairing: bool,
    /// Combination weights, scaled to unit Euclidean norm.
    pub weights: Vec<f64>,
    /// Held-out standardized score of the combined stream.
    pub held_out_score: f64,
    pub flat: bool,
    /// Fitted `(mean, width)` of the combined stream on held-out epochs.
    pub portfolio_mean: f64,
    pub portfolio_width: f64,
}

fn combine(streams: &[&[f64]], w: &[f64]) -> Vec<f64> {
    (0..streams[0].len()).map(|t| streams.iter().zip(w).map(|(s, wk)| wk * s[t]).sum()).collect()
}

/// Combined series `sum_k w_k x_k` for each row-aligned stream set.
pub fn combine_streams(streams: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    if streams.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: streams.len(), actual: weights.len() });
    }
    let refs: Vec<&[f64]> = streams.iter().map(Vec::as_slice).collect();
    Ok(combine(&refs, weights))
}

pub fn portfolio_of_indicators(
    names: &[String],
    streams: &[Vec<f64>],
    cfg: &IndicatorConfig,
) -> Result<IndicatorReport> {
    if streams.len() < 2 {
        return Err(Error::InvalidInput("a portfolio of indicators needs at least two streams".into()));
    }
    if names.len() != streams.len() {
        return Err(Error::DimensionMismatch { expected: streams.len(), actual: names.len() });
    }
    let len = streams[0].len();
    if let Some(bad) = streams.iter().position(|s| s.len() != len) {
        return Err(Error::LengthMismatch(format!(
            "stream {} has {} epochs, expected {len}",
            names[bad],
            streams[bad].len()
        )));
    }
    let half = len / 2;
    let train: Vec<&[f64]> = streams.iter().map(|s| &s[..half]).collect();
    let held: Vec<&[f64]> = streams.iter().map(|s| &s[half..]).collect();

    let marginals = train
        .iter()
        .zip(names)
        .map(|(s, name)| fit_exponential(s).map_err(|e| Error::DegenerateData(format!("{name}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let y: Vec<Vec<f64>> =
        train.iter().zip(&marginals).map(|(s, m)| s.iter().map(|&v| m.to_gaussian(v)).collect()).collect();
    let (correlation, degenerate_pairing) = match estimate_correlation(&y, cfg.pre_average) {
        Ok(c) => (Some(c), false),
        Err(Error::IllConditioned { .. }) => (None, true),
        Err(e) => return Err(e),
    };

    let k = streams.len();
    let uniform = vec![1.0 / (k as f64).sqrt(); k];
    let score = |w: &[f64]| standardized_score(&combine(&train, w), &combine(&held, w));
    let (raw, flat) = if cfg.fit_weights {
        let bounds = vec![cfg.weight_bounds; k];
        let mut asa_cfg = cfg.asa.clone();
        if asa_cfg.initial_point.is_none() {
            asa_cfg.initial_point =
                Some(uniform.iter().map(|w| w.clamp(cfg.weight_bounds.0, cfg.weight_bounds.1)).collect());
        }
        let run = asa::minimize(
            |w: &[f64]| match score(w) {
                Ok(s) => -s,
                Err(_) => f64::INFINITY,
            },
            &bounds,
            &asa_cfg,
        )?;
        let wb = &run.window_bests;
        let improvement = if wb.len() >= 2 { wb[wb.len() - 2] - wb[wb.len() - 1] } else { 0.0 };
        (run.best_point, improvement < cfg.flat_tolerance)
    } else {
        (uniform, false)
    };
    let norm = raw.iter().map(|w| w * w).sum::<f64>().sqrt();
    let weights: Vec<f64> = if norm > 0.0 { raw.iter().map(|w| w / norm).collect() } else { raw };
    let held_combined = combine(&held, &weights);
    let shape = fit_exponential(&held_combined)?;
    Ok(IndicatorReport {
        names: names.to_vec(),
        train_epochs: half,
        held_epochs: len - half,
        marginals,
        correlation,
        degenerate_pairing,
        held_out_score: score(&weights)?,
        weights,
        flat,
        portfolio_mean: shape.mean(),
        portfolio_width: shape.chi(),
    })
}
