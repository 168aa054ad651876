//! Gaussian copula: marginal transforms, stabilized correlation estimates,
//! copula density and effective action.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::linalg::{cholesky_inverse, cholesky_log_det, cholesky_with_floor, Matrix};
use crate::marginal::ExponentialMarginal;
use crate::special::{erfc, erfc_inv};
use crate::stats::pairwise_sum;
use crate::{Error, Result};

/// Clamp on |dy| in standard deviations.
pub const Y_MAX: f64 = 8.0;

/// Relative pivot floor separating rank deficiency from roundoff.
pub const PD_EPSILON: f64 = 1e-10;

/// Default trailing pre-averaging window, in epochs.
pub const DEFAULT_PRE_AVERAGE: usize = 3;

impl ExponentialMarginal {
    /// Map `dx` to the standard-normal variable with the same cdf value.
    pub fn to_gaussian(&self, dx: f64) -> f64 {
        let r = dx - self.mean();
        if r == 0.0 {
            return 0.0;
        }
        // 1 - (1 - e^{-t}) kept as e^{-t} so the tail keeps its digits
        let tail = (-r.abs() / self.width_at(dx)).exp();
        let dy = SQRT_2 * erfc_inv(tail);
        r.signum() * dy.min(Y_MAX)
    }

    /// Inverse of [`to_gaussian`](Self::to_gaussian).
    pub fn from_gaussian(&self, dy: f64) -> f64 {
        if dy == 0.0 {
            return self.mean();
        }
        let chi = if dy < 0.0 { self.width_at(f64::NEG_INFINITY) } else { self.width_at(f64::INFINITY) };
        self.mean() - dy.signum() * chi * erfc(dy.abs() / SQRT_2).ln()
    }
}

/// Unit-diagonal correlation matrix `g^{ij}` with its factor, inverse
/// (the metric `g_{ij}`) and log-determinant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCorrelation", into = "RawCorrelation")]
pub struct CorrelationMatrix {
    entries: Matrix,
    metric: Matrix,
    factor: Matrix,
    log_det: f64,
}

#[derive(Serialize, Deserialize)]
struct RawCorrelation {
    dimension: usize,
    entries: Vec<f64>,
}

impl TryFrom<RawCorrelation> for CorrelationMatrix {
    type Error = Error;
    fn try_from(raw: RawCorrelation) -> Result<Self> {
        Self::new(Matrix::from_row_major(raw.dimension, raw.dimension, raw.entries)?)
    }
}

impl From<CorrelationMatrix> for RawCorrelation {
    fn from(c: CorrelationMatrix) -> Self {
        Self { dimension: c.dimension(), entries: c.entries.as_slice().to_vec() }
    }
}

impl CorrelationMatrix {
    /// Validate and factor. Pivots below `PD_EPSILON` (relative to the unit
    /// diagonal) are reported as [`Error::IllConditioned`].
    pub fn new(entries: Matrix) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch { expected: entries.rows(), actual: entries.cols() });
        }
        let n = entries.rows();
        if n == 0 {
            return Err(Error::InvalidInput("empty correlation matrix".into()));
        }
        for i in 0..n {
            if entries[(i, i)] != 1.0 {
                return Err(Error::InvalidInput(format!("diagonal entry {i} is {} not 1", entries[(i, i)])));
            }
            for j in 0..n {
                let v = entries[(i, j)];
                if !v.is_finite() || v.abs() > 1.0 {
                    return Err(Error::NotPositiveDefinite { index: i.max(j), pivot: 1.0 - v * v });
                }
            }
        }
        if !entries.is_symmetric(0.0) {
            return Err(Error::InvalidInput("correlation matrix not symmetric".into()));
        }
        let factor = cholesky_with_floor(&entries, PD_EPSILON).map_err(|e| match e {
            Error::NotPositiveDefinite { index, pivot } => Error::IllConditioned { index, pivot },
            other => other,
        })?;
        let metric = cholesky_inverse(&factor);
        let log_det = cholesky_log_det(&factor);
        Ok(Self { entries, metric, factor, log_det })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn identity(n: usize) -> Self {
        Self::new(Matrix::identity(n)).expect("identity is positive definite")
    }

    pub fn dimension(&self) -> usize {
        self.entries.rows()
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// The metric `g_{ij}`.
    pub fn inverse(&self) -> &Matrix {
        &self.metric
    }

    /// Lower-triangular `C` with `C C^T = g`.
    pub fn cholesky_factor(&self) -> &Matrix {
        &self.factor
    }

    pub fn determinant(&self) -> f64 {
        self.log_det.exp()
    }

    pub fn log_determinant(&self) -> f64 {
        self.log_det
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len == self.dimension() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dimension(), actual: len })
        }
    }

    /// `dy^T g_{ij} dy`.
    pub fn quadratic_form(&self, dy: &[f64]) -> Result<f64> {
        self.check_dim(dy.len())?;
        let gy = self.metric.mat_vec(dy)?;
        Ok(dy.iter().zip(&gy).map(|(a, b)| a * b).sum())
    }
}

/// Marginals plus their y-space correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaModel {
    marginals: Vec<ExponentialMarginal>,
    correlation: CorrelationMatrix,
}

impl CopulaModel {
    pub fn new(marginals: Vec<ExponentialMarginal>, correlation: CorrelationMatrix) -> Result<Self> {
        if marginals.len() != correlation.dimension() {
            return Err(Error::DimensionMismatch { expected: correlation.dimension(), actual: marginals.len() });
        }
        Ok(Self { marginals, correlation })
    }

    pub fn independent(marginals: Vec<ExponentialMarginal>) -> Self {
        let n = marginals.len();
        Self { marginals, correlation: CorrelationMatrix::identity(n) }
    }

    pub fn dimension(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[ExponentialMarginal] {
        &self.marginals
    }

    pub fn correlation(&self) -> &CorrelationMatrix {
        &self.correlation
    }

    pub fn to_gaussian(&self, dx: &[f64]) -> Result<Vec<f64>> {
        self.correlation.check_dim(dx.len())?;
        Ok(self.marginals.iter().zip(dx).map(|(m, &x)| m.to_gaussian(x)).collect())
    }
}

/// Trailing moving average; output length `len - window + 1`.
pub fn pre_average(series: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 {
        return series.to_vec();
    }
    series.windows(window).map(|w| pairwise_sum(w) / window as f64).collect()
}

/// Correlation of `N` channels of y-space data after trailing pre-averaging.
pub fn estimate_correlation(y_series: &[Vec<f64>], pre_average_window: usize) -> Result<CorrelationMatrix> {
    let n = y_series.len();
    if n == 0 {
        return Err(Error::InvalidInput("no channels".into()));
    }
    let len = y_series[0].len();
    if let Some(bad) = y_series.iter().find(|s| s.len() != len) {
        return Err(Error::LengthMismatch(format!("channel lengths {len} and {}", bad.len())));
    }
    let window = pre_average_window.max(1);
    let averaged_len = (len + 1).saturating_sub(window);
    if averaged_len <= n {
        return Err(Error::WindowTooShort { epochs: averaged_len, channels: n });
    }
    let centered: Vec<Vec<f64>> = y_series
        .iter()
        .map(|s| {
            let avg = pre_average(s, window);
            let m = pairwise_sum(&avg) / avg.len() as f64;
            avg.into_iter().map(|v| v - m).collect()
        })
        .collect();
    let mut cov = Matrix::zeros(n, n);
    let mut prod = vec![0.0; averaged_len];
    for i in 0..n {
        for j in 0..=i {
            for (t, p) in prod.iter_mut().enumerate() {
                *p = centered[i][t] * centered[j][t];
            }
            let c = pairwise_sum(&prod);
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }
    let scale: Vec<f64> = (0..n).map(|i| cov[(i, i)].sqrt()).collect();
    if let Some(i) = scale.iter().position(|s| !(*s > 0.0)) {
        return Err(Error::IllConditioned { index: i, pivot: 0.0 });
    }
    let mut rho = Matrix::identity(n);
    for i in 0..n {
        for j in 0..i {
            let r = (cov[(i, j)] / (scale[i] * scale[j])).clamp(-1.0, 1.0);
            rho[(i, j)] = r;
            rho[(j, i)] = r;
        }
    }
    CorrelationMatrix::new(rho)
}

/// Gaussian copula factor `g^{-1/2} exp(-1/2 dy^T (g_{ij} - I) dy)`.
pub fn copula_density(corr: &CorrelationMatrix, dy: &[f64]) -> Result<f64> {
    let q = corr.quadratic_form(dy)?;
    let norm: f64 = dy.iter().map(|v| v * v).sum();
    Ok((-0.5 * corr.log_determinant() - 0.5 * (q - norm)).exp())
}

/// Joint x-space density: copula factor times the product of marginals.
pub fn joint_density(model: &CopulaModel, dx: &[f64]) -> Result<f64> {
    let dy = model.to_gaussian(dx)?;
    let marginal: f64 = model.marginals.iter().zip(dx).map(|(m, &x)| m.pdf(x)).product();
    Ok(copula_density(&model.correlation, &dy)? * marginal)
}

/// `A_eff = L dt + 1/2 ln g + N/2 ln(2 pi dt)` with
/// `L = dy^T g_{ij} dy / (2 dt^2)`.
pub fn effective_action(corr: &CorrelationMatrix, dy: &[f64], dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::OutOfDomain { value: dt, domain: "dt > 0" });
    }
    let lagrangian = lagrangian(corr, dy, dt)?;
    let n = corr.dimension() as f64;
    Ok(lagrangian * dt + 0.5 * corr.log_determinant() + 0.5 * n * (2.0 * PI * dt).ln())
}

pub fn lagrangian(corr: &CorrelationMatrix, dy: &[f64], dt: f64) -> Result<f64> {
    Ok(corr.quadratic_form(dy)? / (2.0 * dt * dt))
}
