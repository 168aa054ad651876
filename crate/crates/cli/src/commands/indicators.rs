use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tailcop::indicators::{self, overlap_matrix, IndicatorReport};
use tailcop::smni::standardized_innovations;

use super::{resolve, smni::load_net, Context};
use crate::config::{read_json, write_json};
use crate::error::{CliError, CliResult};
use crate::table::read_table;

/// One collection method: a named column of its data file, or the
/// standardized innovations of a named electrode under a fitted net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndicatorMethod {
    pub name: String,
    pub column: String,
    #[serde(default)]
    pub net: Option<PathBuf>,
}

/// One data file per method, in method order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndicatorState {
    pub name: String,
    pub data: Vec<PathBuf>,
}

/// Relative paths resolve against the spec file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndicatorSpec {
    pub methods: Vec<IndicatorMethod>,
    pub states: Vec<IndicatorState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateReport {
    pub name: String,
    #[serde(flatten)]
    pub report: IndicatorReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorsOutput {
    pub states: Vec<StateReport>,
    /// Bhattacharyya overlaps of the states' held-out portfolio shapes.
    pub overlap: Vec<Vec<f64>>,
}

/// The method's stream and the row count of its data file.
fn stream(base: &Path, method: &IndicatorMethod, data: &Path) -> CliResult<(usize, Vec<f64>)> {
    let data = resolve(base, data);
    let table = read_table(&data)?;
    let rows = table.rows();
    let s: Vec<f64> = match &method.net {
        None => table.column(&method.column).map_err(|e| e.context(&data.display().to_string()))?.to_vec(),
        Some(net) => {
            let net = load_net(&resolve(base, net))?;
            let k = net
                .electrode_index(&method.column)
                .ok_or_else(|| CliError::Parse(format!("method {}: no electrode {}", method.name, method.column)))?;
            let names: Vec<String> = net.electrodes.iter().map(|e| e.name.clone()).collect();
            let series = table.select(&names).map_err(|e| e.context(&data.display().to_string()))?;
            let mut innovations = standardized_innovations(&net, &series)?;
            innovations.swap_remove(k)
        }
    };
    Ok((rows, s))
}

pub fn portfolio_of_indicators(ctx: &Context, spec_path: &Path) -> CliResult<PathBuf> {
    let spec: IndicatorSpec = read_json(spec_path)?;
    let base = spec_path.parent().unwrap_or(Path::new("."));
    if spec.methods.len() < 2 {
        return Err(CliError::Parse("a portfolio of indicators needs at least two methods".into()));
    }
    if spec.states.is_empty() {
        return Err(CliError::Parse("no states given".into()));
    }
    let names: Vec<String> = spec.methods.iter().map(|m| m.name.clone()).collect();
    let mut states = Vec::new();
    for state in &spec.states {
        if state.data.len() != spec.methods.len() {
            return Err(CliError::Parse(format!(
                "state {}: {} data files for {} methods",
                state.name,
                state.data.len(),
                spec.methods.len()
            )));
        }
        let streams =
            spec.methods.iter().zip(&state.data).map(|(m, d)| stream(base, m, d)).collect::<CliResult<Vec<_>>>()?;
        if let Some(k) = streams.iter().position(|(rows, _)| *rows != streams[0].0) {
            return Err(CliError::Parse(format!(
                "state {}: series length mismatch: method {} has {} epochs, method {} has {}",
                state.name, names[k], streams[k].0, names[0], streams[0].0
            )));
        }
        // innovations lose the leading epochs; align everything on the tail
        let len = streams.iter().map(|(_, s)| s.len()).min().unwrap_or(0);
        let streams: Vec<Vec<f64>> = streams.into_iter().map(|(_, s)| s[s.len() - len..].to_vec()).collect();
        let report = indicators::portfolio_of_indicators(&names, &streams, &ctx.cfg.indicators)
            .map_err(|e| CliError::from(e).context(&format!("state {}", state.name)))?;
        if report.degenerate_pairing {
            eprintln!("state {}: degenerate pairing, streams are collinear", state.name);
        }
        if report.flat {
            ctx.log(format!("state {}: weight fit is flat", state.name));
        }
        states.push(StateReport { name: state.name.clone(), report });
    }
    let shapes: Vec<(f64, f64)> = states.iter().map(|s| (s.report.portfolio_mean, s.report.portfolio_width)).collect();
    let out = IndicatorsOutput { overlap: overlap_matrix(&shapes), states };
    let path = ctx.path("indicators.json");
    write_json(&path, &out)?;
    Ok(path)
}
