use serde::{Deserialize, Serialize};

use super::{likelihood_report, LikelihoodReport, SmniRegionNet};
use crate::asa::{minimize_with_refine, AsaConfig, OptResult, DEFAULT_LOCAL_CALLS};
use crate::{Error, Result};

/// A named coordinate released to the optimizer within `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeParameter {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub free: Vec<FreeParameter>,
    pub asa: AsaConfig,
    pub local_calls: usize,
    /// Cost per firing by which recovered states leave their range.
    pub range_penalty: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { free: Vec::new(), asa: AsaConfig::default(), local_calls: DEFAULT_LOCAL_CALLS, range_penalty: 1e3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub net: SmniRegionNet,
    /// `-ln L` plus range penalties.
    pub cost: f64,
    pub report: LikelihoodReport,
    pub run: Option<OptResult>,
}

fn penalized(report: &LikelihoodReport, weight: f64) -> f64 {
    -report.log_likelihood + weight * report.out_of_range
}

/// Maximum-likelihood fit of the free coordinates of `template`: ASA over
/// the penalized negative log likelihood, then a local polish.
pub fn fit_net(data: &[Vec<f64>], template: &SmniRegionNet, cfg: &FitConfig) -> Result<FitResult> {
    let names = template.parameter_names();
    let base = template.parameters();
    let slots: Vec<usize> = cfg
        .free
        .iter()
        .map(|p| {
            names
                .iter()
                .position(|n| *n == p.name)
                .ok_or_else(|| Error::InvalidInput(format!("unknown parameter {}", p.name)))
        })
        .collect::<Result<_>>()?;
    let start_report = likelihood_report(template, data)?;
    if slots.is_empty() {
        return Ok(FitResult {
            net: template.clone(),
            cost: penalized(&start_report, cfg.range_penalty),
            report: start_report,
            run: None,
        });
    }
    let bounds: Vec<(f64, f64)> = cfg.free.iter().map(|p| (p.lower, p.upper)).collect();
    let assemble = |x: &[f64]| {
        let mut full = base.clone();
        for (&slot, &v) in slots.iter().zip(x) {
            full[slot] = v;
        }
        template.with_parameters(&full)
    };
    let cost = |x: &[f64]| match assemble(x).and_then(|net| likelihood_report(&net, data)) {
        Ok(r) => penalized(&r, cfg.range_penalty),
        Err(_) => f64::INFINITY,
    };
    // anneal from the template unless told otherwise; a random start may
    // land where the firing recovery is singular
    let mut asa_cfg = cfg.asa.clone();
    if asa_cfg.initial_point.is_none() {
        asa_cfg.initial_point =
            Some(slots.iter().zip(&bounds).map(|(&slot, &(lo, hi))| base[slot].clamp(lo, hi)).collect());
    }
    let run = minimize_with_refine(cost, &bounds, &asa_cfg, cfg.local_calls)?;
    let net = assemble(&run.best_point)?;
    let report = likelihood_report(&net, data)?;
    Ok(FitResult { cost: penalized(&report, cfg.range_penalty), net, report, run: Some(run) })
}

/// Default search box for a parameter, chosen by its suffix.
pub fn default_bounds(name: &str) -> (f64, f64) {
    match name.rsplit('.').next().unwrap_or_default() {
        "phi" => (-5.0, 5.0),
        "a" => (0.1, 1.5),
        "b" => (-1.0, 1.0),
        "c" => (-0.9, 0.9),
        _ => (0.0, 1.5),
    }
}

/// Every coordinate of `net` released within its default box.
pub fn all_free(net: &SmniRegionNet) -> Vec<FreeParameter> {
    net.parameter_names()
        .into_iter()
        .map(|name| {
            let (lower, upper) = default_bounds(&name);
            FreeParameter { name, lower, upper }
        })
        .collect()
}
