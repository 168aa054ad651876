//! Two-tailed exponential marginals: the x-space model of every indicator.

use serde::{Deserialize, Serialize};

use crate::sampler::UniformStream;
use crate::stats::{mean, pairwise_sum};
use crate::{Error, Result};

/// Default floor on the population variance below which a channel counts as
/// constant, in squared native units.
pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-12;

/// Separate widths below and above the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymmetricWidths {
    pub chi_minus: f64,
    pub chi_plus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMarginal", into = "RawMarginal")]
pub struct ExponentialMarginal {
    m: f64,
    chi: f64,
    widths: Option<AsymmetricWidths>,
}

#[derive(Serialize, Deserialize)]
struct RawMarginal {
    m: f64,
    chi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chi_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chi_plus: Option<f64>,
}

impl TryFrom<RawMarginal> for ExponentialMarginal {
    type Error = Error;

    fn try_from(raw: RawMarginal) -> Result<Self> {
        let mut marginal = Self::new(raw.m, raw.chi)?;
        match (raw.chi_minus, raw.chi_plus) {
            (None, None) => {}
            (Some(lo), Some(hi)) => marginal = marginal.with_widths(lo, hi)?,
            _ => return Err(Error::InvalidInput("chi_minus and chi_plus must be given together".into())),
        }
        Ok(marginal)
    }
}

impl From<ExponentialMarginal> for RawMarginal {
    fn from(m: ExponentialMarginal) -> Self {
        Self { m: m.m, chi: m.chi, chi_minus: m.widths.map(|w| w.chi_minus), chi_plus: m.widths.map(|w| w.chi_plus) }
    }
}

fn check_width(chi: f64) -> Result<()> {
    if chi > 0.0 && chi.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("width must be positive, got {chi}")))
    }
}

impl ExponentialMarginal {
    pub fn new(m: f64, chi: f64) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::InvalidInput(format!("mean must be finite, got {m}")));
        }
        check_width(chi)?;
        Ok(Self { m, chi, widths: None })
    }

    pub fn with_widths(mut self, chi_minus: f64, chi_plus: f64) -> Result<Self> {
        check_width(chi_minus)?;
        check_width(chi_plus)?;
        self.widths = Some(AsymmetricWidths { chi_minus, chi_plus });
        Ok(self)
    }

    pub fn mean(&self) -> f64 {
        self.m
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn widths(&self) -> Option<AsymmetricWidths> {
        self.widths
    }

    pub fn is_asymmetric(&self) -> bool {
        self.widths.is_some()
    }

    fn width_below(&self) -> f64 {
        self.widths.map_or(self.chi, |w| w.chi_minus)
    }

    fn width_above(&self) -> f64 {
        self.widths.map_or(self.chi, |w| w.chi_plus)
    }

    /// Width governing the side of `m` that `dx` falls on.
    pub fn width_at(&self, dx: f64) -> f64 {
        if dx < self.m {
            self.width_below()
        } else {
            self.width_above()
        }
    }

    pub fn pdf(&self, dx: f64) -> f64 {
        let chi = self.width_at(dx);
        (-(dx - self.m).abs() / chi).exp() / (2.0 * chi)
    }

    /// Cumulative distribution, with `cdf(m) == 0.5` exactly.
    pub fn cdf(&self, dx: f64) -> f64 {
        let r = dx - self.m;
        if r == 0.0 {
            0.5
        } else if r < 0.0 {
            0.5 * (r / self.width_below()).exp()
        } else {
            1.0 - 0.5 * (-r / self.width_above()).exp()
        }
    }

    /// Upper-tail probability `1 - cdf(dx)` without cancellation.
    pub fn sf(&self, dx: f64) -> f64 {
        let r = dx - self.m;
        if r > 0.0 {
            0.5 * (-r / self.width_above()).exp()
        } else {
            1.0 - self.cdf(dx)
        }
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::OutOfDomain { value: u, domain: "(0, 1)" });
        }
        Ok(if u < 0.5 {
            self.m + self.width_below() * (2.0 * u).ln()
        } else if u > 0.5 {
            self.m - self.width_above() * (2.0 * (1.0 - u)).ln()
        } else {
            self.m
        })
    }

    /// Draw `n` values by inverse-cdf from a seeded uniform stream.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut stream = UniformStream::new(seed, 0);
        (0..n).map(|_| self.quantile(stream.next_open01()).expect("open-interval uniform")).collect()
    }
}

/// Fit `m = <dx>`, `2 chi^2 = <dx^2> - <dx>^2` with population moments.
pub fn fit_exponential(samples: &[f64]) -> Result<ExponentialMarginal> {
    fit_exponential_with_floor(samples, DEFAULT_VARIANCE_FLOOR)
}

pub fn fit_exponential_with_floor(samples: &[f64], variance_floor: f64) -> Result<ExponentialMarginal> {
    if samples.len() < 2 {
        return Err(Error::DegenerateData(format!("need at least 2 samples, got {}", samples.len())));
    }
    if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite sample {bad}")));
    }
    let m = mean(samples);
    let centered: Vec<f64> = samples.iter().map(|v| (v - m) * (v - m)).collect();
    let variance = pairwise_sum(&centered) / samples.len() as f64;
    if !(variance >= variance_floor) || variance == 0.0 {
        return Err(Error::DegenerateData(format!("variance {variance:e} below floor {variance_floor:e}")));
    }
    ExponentialMarginal::new(m, (variance / 2.0).sqrt())
}

/// Symmetric fit plus one-sided widths from second moments about `m`:
/// `2 chi_side^2 = <(dx - m)^2 | side>`.
pub fn fit_asymmetric(samples: &[f64]) -> Result<ExponentialMarginal> {
    let sym = fit_exponential(samples)?;
    let m = sym.mean();
    let side = |below: bool| -> Result<f64> {
        let sq: Vec<f64> =
            samples.iter().filter(|&&v| if below { v < m } else { v > m }).map(|v| (v - m) * (v - m)).collect();
        if sq.is_empty() {
            return Err(Error::DegenerateData(format!(
                "no samples {} the mean",
                if below { "below" } else { "above" }
            )));
        }
        Ok((pairwise_sum(&sq) / sq.len() as f64 / 2.0).sqrt())
    };
    sym.with_widths(side(true)?, side(false)?)
}
