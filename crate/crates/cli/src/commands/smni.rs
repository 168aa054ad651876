use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tailcop::smni::{all_free, centering_check, fit_net, simulate_with, Electrode, FreeParameter, SimulateOptions};
use tailcop::{ColumnParams, SmniRegionNet};

use super::Context;
use crate::config::{read_json, write_json};
use crate::error::{CliError, CliResult};
use crate::table::{format_number, io_error, read_table, write_row, writer};

/// Five-electrode P300 circuit used when no template is given.
pub fn default_net() -> SmniRegionNet {
    SmniRegionNet::p300(
        ColumnParams::default(),
        [
            Electrode::new("Fz", 1.0, 0.6, -0.4, 0.5),
            Electrode::new("Cz", -0.5, 0.5, 0.3, 0.4),
            Electrode::new("Pz", 0.3, 0.7, -0.2, 0.6),
            Electrode::new("P3", 0.0, 0.4, 0.5, 0.3),
            Electrode::new("P4", -1.0, 0.55, 0.25, -0.3),
        ],
        [0.5, 0.6, 0.4, 0.7],
    )
    .expect("built-in net is valid")
}

pub fn load_net(path: &Path) -> CliResult<SmniRegionNet> {
    let net: SmniRegionNet = read_json(path)?;
    net.validate().map_err(|e| CliError::from(e).context(&path.display().to_string()))?;
    Ok(net)
}

fn template(ctx: &Context, net: Option<&Path>) -> CliResult<SmniRegionNet> {
    match net.or(ctx.cfg.smni.net.as_deref()) {
        Some(p) => load_net(p),
        None => Ok(default_net()),
    }
}

/// `NAME:LO:HI`.
pub fn parse_free(s: &str) -> CliResult<FreeParameter> {
    let mut parts = s.rsplitn(3, ':');
    let (hi, lo, name) = (parts.next(), parts.next(), parts.next());
    let bad = || CliError::Parse(format!("free parameter {s:?} is not NAME:LO:HI"));
    let (Some(hi), Some(lo), Some(name)) = (hi, lo, name) else {
        return Err(bad());
    };
    Ok(FreeParameter {
        name: name.to_string(),
        lower: lo.trim().parse().map_err(|_| bad())?,
        upper: hi.trim().parse().map_err(|_| bad())?,
    })
}

fn read_series(net: &SmniRegionNet, data: &Path) -> CliResult<Vec<Vec<f64>>> {
    let table = read_table(data)?;
    let names: Vec<String> = net.electrodes.iter().map(|e| e.name.clone()).collect();
    table.select(&names).map_err(|e| e.context(&data.display().to_string()))
}

pub fn smni_template(ctx: &Context, net: Option<&Path>) -> CliResult<PathBuf> {
    let path = ctx.path("net.json");
    write_json(&path, &template(ctx, net)?)?;
    Ok(path)
}

pub fn smni_simulate(ctx: &Context, net: Option<&Path>, epochs: Option<usize>) -> CliResult<PathBuf> {
    let net = template(ctx, net)?;
    let epochs = epochs.unwrap_or(ctx.cfg.smni.epochs);
    let opts = SimulateOptions { noise_scale: ctx.cfg.smni.noise_scale, initial_firings: None };
    let phi = simulate_with(&net, epochs, ctx.cfg.seed, &opts)?;
    let names: Vec<String> = net.electrodes.iter().map(|e| e.name.clone()).collect();
    let path = ctx.path("phi.csv");
    crate::table::write_table(&path, &names, &phi)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub net: SmniRegionNet,
    /// Negative log likelihood plus range penalties.
    pub cost: f64,
    pub log_likelihood: f64,
    pub points: usize,
    pub clamped: usize,
    pub out_of_range: f64,
    pub out_of_range_flag: bool,
    pub free: Vec<FreeParameter>,
    pub trials: usize,
}

/// `free` replaces the configured free set when non-empty; `free_all`
/// releases every coordinate within its default box.
pub fn smni_fit(
    ctx: &Context,
    net: Option<&Path>,
    data: &Path,
    free: &[FreeParameter],
    free_all: bool,
) -> CliResult<PathBuf> {
    let net = template(ctx, net)?;
    let series = read_series(&net, data)?;
    let mut cfg = ctx.cfg.smni.fit.clone();
    if free_all {
        cfg.free = all_free(&net);
    } else if !free.is_empty() {
        cfg.free = free.to_vec();
    }
    ctx.log(format!("fitting {} free parameters", cfg.free.len()));
    let fit = fit_net(&series, &net, &cfg)?;
    if fit.report.out_of_range_flag() {
        eprintln!("warning: recovered firings leave their range in more than 1% of epochs");
    }
    let out = FitOutput {
        cost: fit.cost,
        log_likelihood: fit.report.log_likelihood,
        points: fit.report.points,
        clamped: fit.report.clamped,
        out_of_range: fit.report.out_of_range,
        out_of_range_flag: fit.report.out_of_range_flag(),
        free: cfg.free,
        trials: fit.run.as_ref().map_or(0, |r| r.trials),
        net: fit.net,
    };
    let path = ctx.path("fitted_net.json");
    write_json(&path, &out)?;
    println!("cost,{}", format_number(out.cost));
    Ok(path)
}

pub fn smni_check(ctx: &Context, net: Option<&Path>, data: &Path) -> CliResult<PathBuf> {
    let net = template(ctx, net)?;
    let series = read_series(&net, data)?;
    let rows = centering_check(&net, &series)?;
    let path = ctx.path("centering.csv");
    let mut out = writer(&path)?;
    write_row(&mut out, ["electrode", "mean_e", "rms_e", "mean_i", "rms_i", "flagged"], &path)?;
    for r in &rows {
        let fields = [
            r.electrode.clone(),
            format_number(r.mean_e),
            format_number(r.rms_e),
            format_number(r.mean_i),
            format_number(r.rms_i),
            r.flagged.to_string(),
        ];
        write_row(&mut out, fields.iter().map(String::as_str), &path)?;
    }
    out.flush().map_err(|e| io_error(&path, e))?;
    if rows.iter().any(|r| r.flagged) {
        eprintln!("warning: centering check flagged at least one electrode");
    }
    Ok(path)
}
