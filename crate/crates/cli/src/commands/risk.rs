use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tailcop::asa::ExitReason;
use tailcop::copula::estimate_correlation;
use tailcop::marginal::{fit_asymmetric, fit_exponential};
use tailcop::portfolio::{fit_bins, optimize_positions_report, returns, risk_report, LinearWeights};
use tailcop::sampler::sample_events;
use tailcop::{CorrelationMatrix, EventBatch, PortfolioSpec, RiskReport};

use super::Context;
use crate::config::{write_json, ModelFile};
use crate::error::{CliError, CliResult};
use crate::table::{format_number, io_error, read_table, write_row, write_table, writer};

pub fn fit_marginals(ctx: &Context, csv: &Path) -> CliResult<PathBuf> {
    let table = read_table(csv)?;
    let rows = table.rows();
    if rows < 2 {
        return Err(CliError::Parse(format!("{}: need at least 2 data rows, got {rows}", csv.display())));
    }
    let start = ctx.cfg.marginal_window.map_or(0, |w| rows.saturating_sub(w));
    let mut marginals = Vec::new();
    for (name, col) in table.names.iter().zip(&table.columns) {
        let window = &col[start..];
        let fit = if ctx.cfg.asymmetric { fit_asymmetric(window) } else { fit_exponential(window) };
        marginals.push(fit.map_err(|e| CliError::from(e).context(&format!("channel {name}")))?);
    }
    let correlation = if table.names.len() > 1 {
        let y: Vec<Vec<f64>> = table
            .columns
            .iter()
            .zip(&marginals)
            .map(|(c, m)| c[start..].iter().map(|&v| m.to_gaussian(v)).collect())
            .collect();
        estimate_correlation(&y, ctx.cfg.pre_average).map_err(|e| CliError::from(e).context("correlation"))?
    } else {
        CorrelationMatrix::identity(1)
    };
    let n = correlation.dimension();
    let model = ModelFile {
        channels: table.names.clone(),
        marginals,
        correlation: (0..n).map(|i| (0..n).map(|j| correlation.get(i, j)).collect()).collect(),
        epochs: rows - start,
        pre_average: ctx.cfg.pre_average,
    };
    let path = ctx.path("model.json");
    write_json(&path, &model)?;
    println!("channel,m,chi");
    for (name, m) in model.channels.iter().zip(&model.marginals) {
        println!("{name},{},{}", format_number(m.mean()), format_number(m.chi()));
    }
    Ok(path)
}

fn events_for(ctx: &Context, model: &ModelFile, n: usize) -> CliResult<EventBatch> {
    if n == 0 {
        return Err(CliError::Parse("event count must be positive".into()));
    }
    let copula = model.copula()?;
    ctx.log(format!("sampling {n} events, seed {}", ctx.cfg.seed));
    Ok(sample_events(&copula, n, ctx.cfg.seed)?)
}

pub fn sample(ctx: &Context, model_path: &Path, n: usize) -> CliResult<PathBuf> {
    let model = ModelFile::load(model_path)?;
    let events = events_for(ctx, &model, n)?;
    let columns: Vec<Vec<f64>> = (0..events.dimension()).map(|j| events.dx_column(j)).collect();
    let path = ctx.path("events.csv");
    write_table(&path, &model.channels, &columns)?;
    Ok(path)
}

/// Linear spec from comma-separated weights and optional offsets.
pub fn spec_from_weights(weights: &str, offsets: Option<&str>) -> CliResult<PortfolioSpec> {
    let a = parse_list(weights)?;
    let b = match offsets {
        Some(s) => parse_list(s)?,
        None => vec![0.0; a.len()],
    };
    Ok(PortfolioSpec::Linear(LinearWeights::new(a, b).map_err(CliError::from)?))
}

fn parse_list(s: &str) -> CliResult<Vec<f64>> {
    s.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Parse(format!("not a number: {v:?}")))).collect()
}

/// `lo:hi` pairs separated by commas; a single pair applies to every position.
pub fn parse_bounds(s: &str, dimension: usize) -> CliResult<Vec<(f64, f64)>> {
    let pairs: Vec<(f64, f64)> = s
        .split(',')
        .map(|p| {
            let (lo, hi) = p.split_once(':').ok_or_else(|| CliError::Parse(format!("bounds {p:?} are not lo:hi")))?;
            let num = |v: &str| v.trim().parse::<f64>().map_err(|_| CliError::Parse(format!("not a number: {v:?}")));
            Ok((num(lo)?, num(hi)?))
        })
        .collect::<CliResult<_>>()?;
    match pairs.len() {
        1 => Ok(vec![pairs[0]; dimension]),
        n if n == dimension => Ok(pairs),
        n => Err(CliError::Parse(format!("{n} bounds for {dimension} positions"))),
    }
}

fn check_spec(model: &ModelFile, spec: &PortfolioSpec) -> CliResult<()> {
    if spec.dimension() != model.channels.len() {
        return Err(CliError::Parse(format!(
            "portfolio has {} positions, model has {} channels",
            spec.dimension(),
            model.channels.len()
        )));
    }
    Ok(())
}

pub fn risk(ctx: &Context, model_path: &Path, spec: &PortfolioSpec) -> CliResult<(PathBuf, PathBuf)> {
    let model = ModelFile::load(model_path)?;
    check_spec(&model, spec)?;
    let events = events_for(ctx, &model, ctx.cfg.events)?;
    let dm = returns(&events, spec)?;
    let dist = fit_bins(&dm, ctx.cfg.risk.bin_count)?;
    let report: RiskReport = risk_report(&dist, ctx.cfg.risk.var, ctx.cfg.risk.q_target);
    let report_path = ctx.path("risk.json");
    write_json(&report_path, &report)?;
    let bins_path = ctx.path("bins.csv");
    let mut out = writer(&bins_path)?;
    write_row(&mut out, ["low", "high", "count"], &bins_path)?;
    for b in &dist.bins {
        let fields = [format_number(b.low), format_number(b.high), b.count.to_string()];
        write_row(&mut out, fields.iter().map(String::as_str), &bins_path)?;
    }
    out.flush().map_err(|e| io_error(&bins_path, e))?;
    Ok((report_path, bins_path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOutput {
    pub spec: PortfolioSpec,
    pub feasible: bool,
    /// Mean sampled portfolio return at the reported positions.
    pub mean_return: f64,
    pub q: f64,
    pub cost_q: f64,
    pub total: f64,
    pub tolerance: f64,
    pub trials: usize,
    pub exit_reason: ExitReason,
}

/// Writes the best spec found even when it misses the `Q` tolerance, then
/// reports the miss as an error.
pub fn optimize(
    ctx: &Context,
    model_path: &Path,
    template: &PortfolioSpec,
    bounds: &[(f64, f64)],
) -> CliResult<PathBuf> {
    let model = ModelFile::load(model_path)?;
    check_spec(&model, template)?;
    let events = events_for(ctx, &model, ctx.cfg.events)?;
    let fit = optimize_positions_report(&events, template, bounds, &ctx.cfg.risk, &ctx.cfg.asa)?;
    ctx.log(format!("{} trials, exit {:?}, cost_q {:e}", fit.run.trials, fit.run.exit_reason, fit.cost.cost_q));
    let out = OptimizeOutput {
        spec: fit.spec,
        feasible: fit.feasible,
        mean_return: -fit.cost.objective,
        q: fit.cost.q,
        cost_q: fit.cost.cost_q,
        total: fit.cost.total,
        tolerance: ctx.cfg.risk.tolerance,
        trials: fit.run.trials,
        exit_reason: fit.run.exit_reason,
    };
    let path = ctx.path("optimized.json");
    write_json(&path, &out)?;
    if !out.feasible {
        return Err(CliError::Infeasible(format!(
            "no sampled positions met the Q constraint: best cost_q {:e} with tolerance {:e}; best spec written to {}",
            out.cost_q,
            out.tolerance,
            path.display()
        )));
    }
    Ok(path)
}
