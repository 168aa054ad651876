//! Batch front end for the tailcop engine.

pub mod commands;
pub mod config;
pub mod error;
pub mod table;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::config::RunConfig;
pub use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "tailcop", version, about = "Copula tail-risk and neocortical-model engine")]
pub struct Cli {
    /// Run configuration JSON.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random stream; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct PortfolioArgs {
    /// Portfolio spec JSON.
    #[arg(long, conflicts_with = "weights")]
    pub spec: Option<PathBuf>,
    /// Comma-separated linear weights, one per channel.
    #[arg(long)]
    pub weights: Option<String>,
    /// Comma-separated offsets added per channel.
    #[arg(long, requires = "weights")]
    pub offsets: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit marginals and the copula correlation to a CSV; writes model.json.
    FitMarginals { csv: PathBuf },
    /// Draw events from a model; writes events.csv.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(short, long)]
        n: usize,
    },
    /// Portfolio tail report; writes risk.json and bins.csv.
    Risk {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        portfolio: PortfolioArgs,
        #[arg(long)]
        var: Option<f64>,
        #[arg(long)]
        q_target: Option<f64>,
        #[arg(short, long)]
        n: Option<usize>,
    },
    /// Anneal positions under the Q constraint; writes optimized.json.
    Optimize {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        portfolio: PortfolioArgs,
        /// `lo:hi` per position, or one pair for all.
        #[arg(long)]
        bounds: String,
        #[arg(short, long)]
        n: Option<usize>,
    },
    #[command(subcommand)]
    Smni(SmniCommand),
    /// Combine indicator streams across states; writes indicators.json.
    PortfolioOfIndicators { spec: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum SmniCommand {
    /// Write the net template as net.json.
    Template {
        #[arg(long)]
        net: Option<PathBuf>,
    },
    /// Simulate electrode potentials; writes phi.csv.
    Simulate {
        #[arg(long)]
        net: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Maximum-likelihood fit; writes fitted_net.json.
    Fit {
        #[arg(long)]
        net: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// `NAME:LO:HI`, repeatable.
        #[arg(long = "free")]
        free: Vec<String>,
        /// Release every parameter within its default box.
        #[arg(long, conflicts_with = "free")]
        free_all: bool,
    },
    /// Recovered-firing summary per electrode; writes centering.csv.
    Check {
        #[arg(long)]
        net: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
    },
}

fn portfolio_spec(args: &PortfolioArgs) -> CliResult<tailcop::PortfolioSpec> {
    match (&args.spec, &args.weights) {
        (Some(p), _) => config::read_json(p),
        (None, Some(w)) => commands::spec_from_weights(w, args.offsets.as_deref()),
        (None, None) => Err(CliError::Parse("give --spec or --weights".into())),
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut cfg = cfg.with_seed(cli.seed);
    let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    match &cli.command {
        Command::Risk { var, q_target, n, .. } => {
            if let Some(v) = var {
                cfg.risk.var = *v;
            }
            if let Some(q) = q_target {
                cfg.risk.q_target = *q;
            }
            if let Some(n) = n {
                cfg.events = *n;
            }
        }
        Command::Optimize { n: Some(n), .. } => cfg.events = *n,
        _ => {}
    }
    let ctx = Context::new(cfg, out, cli.verbose)?;
    match cli.command {
        Command::FitMarginals { csv } => commands::fit_marginals(&ctx, &csv).map(drop),
        Command::Sample { model, n } => commands::sample(&ctx, &model, n).map(drop),
        Command::Risk { model, portfolio, .. } => commands::risk(&ctx, &model, &portfolio_spec(&portfolio)?).map(drop),
        Command::Optimize { model, portfolio, bounds, .. } => {
            let spec = portfolio_spec(&portfolio)?;
            let bounds = commands::parse_bounds(&bounds, spec.dimension())?;
            commands::optimize(&ctx, &model, &spec, &bounds).map(drop)
        }
        Command::Smni(sub) => match sub {
            SmniCommand::Template { net } => commands::smni_template(&ctx, net.as_deref()).map(drop),
            SmniCommand::Simulate { net, epochs } => commands::smni_simulate(&ctx, net.as_deref(), epochs).map(drop),
            SmniCommand::Fit { net, data, free, free_all } => {
                let free = free.iter().map(|s| commands::parse_free(s)).collect::<CliResult<Vec<_>>>()?;
                commands::smni_fit(&ctx, net.as_deref(), &data, &free, free_all).map(drop)
            }
            SmniCommand::Check { net, data } => commands::smni_check(&ctx, net.as_deref(), &data).map(drop),
        },
        Command::PortfolioOfIndicators { spec } => commands::portfolio_of_indicators(&ctx, &spec).map(drop),
    }
}
