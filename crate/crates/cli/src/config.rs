//! Run configuration and the JSON model file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tailcop::copula::DEFAULT_PRE_AVERAGE;
use tailcop::indicators::IndicatorConfig;
use tailcop::portfolio::RiskConfig;
use tailcop::smni::FitConfig;
use tailcop::{AsaConfig, CopulaModel, CorrelationMatrix, ExponentialMarginal};

use crate::error::{CliError, CliResult};

pub const DEFAULT_EVENTS: usize = 100_000;
pub const DEFAULT_SMNI_EPOCHS: usize = 950;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Drives every random stream, annealing included.
    pub seed: u64,
    /// Fit marginals on the trailing rows only.
    pub marginal_window: Option<usize>,
    pub pre_average: usize,
    /// Fit one-sided widths.
    pub asymmetric: bool,
    /// Monte Carlo events for risk and optimize.
    pub events: usize,
    pub risk: RiskConfig,
    pub asa: AsaConfig,
    pub smni: SmniConfig,
    pub indicators: IndicatorConfig,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            marginal_window: None,
            pre_average: DEFAULT_PRE_AVERAGE,
            asymmetric: false,
            events: DEFAULT_EVENTS,
            risk: RiskConfig::default(),
            asa: AsaConfig::default(),
            smni: SmniConfig::default(),
            indicators: IndicatorConfig::default(),
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmniConfig {
    /// Net template; the built-in five-electrode circuit when absent.
    pub net: Option<PathBuf>,
    pub epochs: usize,
    pub noise_scale: f64,
    pub fit: FitConfig,
}

impl Default for SmniConfig {
    fn default() -> Self {
        Self { net: None, epochs: DEFAULT_SMNI_EPOCHS, noise_scale: 1.0, fit: FitConfig::default() }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        read_json(path)
    }

    /// The global seed, copied into the annealing blocks.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.asa.seed = self.seed;
        self.smni.fit.asa.seed = self.seed;
        self.indicators.asa.seed = self.seed;
        self
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

/// Fitted channels and their Gaussian-copula correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub channels: Vec<String>,
    pub marginals: Vec<ExponentialMarginal>,
    /// Row-major, unit diagonal.
    pub correlation: Vec<Vec<f64>>,
    pub epochs: usize,
    pub pre_average: usize,
}

impl ModelFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        read_json(path)
    }

    pub fn copula(&self) -> CliResult<CopulaModel> {
        if self.channels.len() != self.marginals.len() {
            return Err(CliError::Parse(format!(
                "{} channel names for {} marginals",
                self.channels.len(),
                self.marginals.len()
            )));
        }
        let corr = CorrelationMatrix::from_rows(&self.correlation)
            .map_err(|e| CliError::from(e).context("model correlation"))?;
        Ok(CopulaModel::new(self.marginals.clone(), corr)?)
    }
}
