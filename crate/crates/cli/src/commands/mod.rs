//! One function per subcommand. Each writes its artifacts under the output
//! directory and returns what it wrote.

mod indicators;
mod risk;
mod smni;

use std::path::{Path, PathBuf};

pub use indicators::{
    portfolio_of_indicators, IndicatorMethod, IndicatorSpec, IndicatorState, IndicatorsOutput, StateReport,
};
pub use risk::{fit_marginals, optimize, parse_bounds, risk, sample, spec_from_weights, OptimizeOutput};
pub use smni::{default_net, parse_free, smni_check, smni_fit, smni_simulate, smni_template, FitOutput};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Resolved settings shared by every command.
#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub verbose: bool,
}

impl Context {
    pub fn new(cfg: RunConfig, out: PathBuf, verbose: bool) -> CliResult<Self> {
        std::fs::create_dir_all(&out)
            .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", out.display())))?;
        Ok(Self { cfg, out, verbose })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.out.join(file)
    }

    pub fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }
}

pub(crate) fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
