//! Columnar synaptic algebra: threshold factors, drifts and diffusions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const E: usize = 0;
pub const I: usize = 1;

/// Synaptic constants of a representative macrocolumn. Two-by-two arrays
/// are indexed `[G][G']`: efferent type first, afferent type second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnParams {
    /// `[N^E, N^I]`.
    pub neurons: [f64; 2],
    /// Firing epoch in ms.
    pub tau: f64,
    /// `V^G` in mV.
    pub thresholds: [f64; 2],
    pub efficacy_a: [[f64; 2]; 2],
    pub efficacy_b: [[f64; 2]; 2],
    /// Polarization means `v^G_{G'}` in mV.
    pub polarization_mean: [[f64; 2]; 2],
    /// Polarization spreads `phi^G_{G'}` in mV; they enter squared.
    pub polarization_spread: [[f64; 2]; 2],
    /// `N^{dagger E}`.
    pub long_range_neurons: f64,
    pub long_range_a: f64,
    pub long_range_b: f64,
    /// Drop firings from the denominator of `F^G`.
    pub denominator_approximation: bool,
}

impl Default for ColumnParams {
    fn default() -> Self {
        Self {
            neurons: [80.0, 30.0],
            tau: 5.0,
            thresholds: [10.0, 10.0],
            efficacy_a: [[0.05; 2]; 2],
            efficacy_b: [[1.0; 2]; 2],
            polarization_mean: [[0.1; 2]; 2],
            polarization_spread: [[0.031; 2]; 2],
            long_range_neurons: 8.0,
            long_range_a: 0.25,
            long_range_b: 1.0,
            denominator_approximation: true,
        }
    }
}

/// Firing state of one region at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Firings {
    pub excitatory: f64,
    pub inhibitory: f64,
    /// Summed long-range afferent `M^{dagger E}`.
    pub long_range: f64,
}

/// Drifts `g^G` and diagonal diffusions `g^{GG}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftDiffusion {
    pub drift: [f64; 2],
    pub diffusion: [f64; 2],
}

impl ColumnParams {
    pub fn check(&self) -> Result<()> {
        if !(self.neurons.iter().all(|&n| n > 0.0) && self.long_range_neurons >= 0.0 && self.tau > 0.0) {
            return Err(Error::InvalidInput("neuron counts and tau must be positive".into()));
        }
        Ok(())
    }

    /// `a^G_{G'} = A/2 + B`.
    pub fn a_total(&self, g: usize, gp: usize) -> f64 {
        0.5 * self.efficacy_a[g][gp] + self.efficacy_b[g][gp]
    }

    pub fn long_range_a_total(&self) -> f64 {
        0.5 * self.long_range_a + self.long_range_b
    }

    fn spread2(&self, g: usize, gp: usize) -> f64 {
        let v = self.polarization_mean[g][gp];
        let p = self.polarization_spread[g][gp];
        v * v + p * p
    }

    /// Numerator of `F^G`: threshold minus synaptic drive.
    pub fn numerator(&self, g: usize, s: &Firings) -> f64 {
        let m = [s.excitatory, s.inhibitory];
        let mut num = self.thresholds[g];
        for gp in [E, I] {
            let v = self.polarization_mean[g][gp];
            num -= self.a_total(g, gp) * v * self.neurons[gp] + 0.5 * self.efficacy_a[g][gp] * v * m[gp];
        }
        if g == E {
            let v = self.polarization_mean[E][E];
            num -= self.long_range_a_total() * v * self.long_range_neurons + 0.5 * self.long_range_a * v * s.long_range;
        }
        num
    }

    /// Squared denominator of `F^G`.
    pub fn denominator2(&self, g: usize, s: &Firings) -> f64 {
        let (m, m_long) = if self.denominator_approximation {
            ([0.0, 0.0], 0.0)
        } else {
            ([s.excitatory, s.inhibitory], s.long_range)
        };
        let mut den = 0.0;
        for gp in [E, I] {
            den +=
                self.spread2(g, gp) * (self.a_total(g, gp) * self.neurons[gp] + 0.5 * self.efficacy_a[g][gp] * m[gp]);
        }
        if g == E {
            den += self.spread2(E, E)
                * (self.long_range_a_total() * self.long_range_neurons + 0.5 * self.long_range_a * m_long);
        }
        PI * den
    }

    /// `[F^E, F^I]`.
    pub fn threshold_factor(&self, s: &Firings) -> Result<[f64; 2]> {
        let mut f = [0.0; 2];
        for g in [E, I] {
            let d2 = self.denominator2(g, s);
            if !(d2 > 0.0) {
                return Err(Error::NonPositiveDenominator { population: if g == E { "E" } else { "I" } });
            }
            f[g] = self.numerator(g, s) / d2.sqrt();
        }
        Ok(f)
    }

    /// `g^G = -(M^G + N^G tanh F^G)/tau`, `g^{GG} = N^G sech^2 F^G / tau`.
    pub fn drifts_diffusions(&self, f: [f64; 2], s: &Firings) -> DriftDiffusion {
        let m = [s.excitatory, s.inhibitory];
        let mut out = DriftDiffusion { drift: [0.0; 2], diffusion: [0.0; 2] };
        for g in [E, I] {
            let sech = 1.0 / f[g].cosh();
            out.drift[g] = -(m[g] + self.neurons[g] * f[g].tanh()) / self.tau;
            out.diffusion[g] = self.neurons[g] * sech * sech / self.tau;
        }
        out
    }

    /// Additive shifts to the diagonal `B^G_G` that zero the numerator of
    /// `F^G` at vanishing firings. Long-range efficacies stay fixed.
    pub fn centering_shift(&self) -> Result<[f64; 2]> {
        let origin = Firings::default();
        let mut shift = [0.0; 2];
        for g in [E, I] {
            // raising B^G_G by delta lowers the numerator by delta v^G_G N^G
            let slope = self.polarization_mean[g][g] * self.neurons[g];
            if slope == 0.0 || !slope.is_finite() {
                return Err(Error::NoSolution(format!("centering slope vanishes for population {g}")));
            }
            shift[g] = self.numerator(g, &origin) / slope;
        }
        Ok(shift)
    }

    pub fn centered(&self) -> Result<Self> {
        let shift = self.centering_shift()?;
        let mut out = self.clone();
        for g in [E, I] {
            out.efficacy_b[g][g] += shift[g];
        }
        Ok(out)
    }
}

pub fn threshold_factor(params: &ColumnParams, s: &Firings) -> Result<[f64; 2]> {
    params.threshold_factor(s)
}

pub fn drifts_diffusions(params: &ColumnParams, f: [f64; 2], s: &Firings) -> DriftDiffusion {
    params.drifts_diffusions(f, s)
}

pub fn centering_shift(params: &ColumnParams) -> Result<[f64; 2]> {
    params.centering_shift()
}
