//! Heavy-tailed marginal fitting, Gaussian copula aggregation and tail-risk
//! measures, adaptive simulated annealing, and the SMNI regional EEG model.
//!
//! The crate is organized bottom-up:
//!
//! - [`marginal`]: two-tailed exponential marginals (fit, pdf, cdf, quantile)
//! - [`copula`]: x-space to y-space transforms, correlation estimation,
//!   copula density and effective action
//! - [`sampler`]: Cholesky factorization and correlated event sampling
//! - [`portfolio`]: portfolio returns, shape fitting, Q / VaR / ETL and
//!   constrained position optimization
//! - [`asa`]: adaptive simulated annealing and local quasi-Newton polish
//! - [`smni`]: columnar threshold factors, regional electrode mapping,
//!   delayed couplings, likelihood, simulation and fitting
//! - [`indicators`]: joint portfolios built from several indicator streams

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asa;
pub mod copula;
mod error;
pub mod indicators;
pub mod linalg;
pub mod marginal;
pub mod portfolio;
pub mod sampler;
pub mod smni;
pub mod special;
pub mod stats;

pub use error::{Error, Result};

pub use asa::{AsaConfig, ExitReason, OptResult};
pub use copula::{CopulaModel, CorrelationMatrix};
pub use marginal::ExponentialMarginal;
pub use portfolio::{PortfolioDistribution, PortfolioSpec, RiskReport};
pub use sampler::EventBatch;
pub use smni::{ColumnParams, SmniRegionNet};
