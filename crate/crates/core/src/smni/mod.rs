//! Regional SMNI model of multi-electrode EEG.
//!
//! Each electrode is one macrocolumn-averaged region. Its potential maps
//! linearly onto firings, `Phi - phi = a M^E + b M^I` with `M^I = c M^E`, so
//! the short-time conditional density of `Phi` is Gaussian with drift and
//! diffusion inherited from the columnar algebra in [`column`]. Regions
//! couple through delayed long-range excitatory afferents.

pub mod column;
mod fit;


use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use column::{centering_shift, drifts_diffusions, threshold_factor, ColumnParams, DriftDiffusion, Firings, E, I};
pub use fit::{all_free, default_bounds, fit_net, FitConfig, FitResult, FreeParameter};

use crate::sampler::NormalStream;
use crate::stats::pairwise_sum;
use crate::{Error, Result};

/// Epoch length in ms for the P300 configuration.
pub const DEFAULT_DT: f64 = 5.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Electrode {
    pub name: String,
    /// Potential offset in uV.
    pub phi: f64,
    /// uV per excitatory firing.
    pub a: f64,
    /// uV per inhibitory firing.
    pub b: f64,
    /// Trough slope, `M^I = c M^E`.
    pub c: f64,
}

impl Electrode {
    pub fn new(name: &str, phi: f64, a: f64, b: f64, c: f64) -> Self {
        Self { name: name.to_string(), phi, a, b, c }
    }

    /// `a + b c`, the potential per excitatory firing along the trough.
    pub fn gain(&self) -> f64 {
        self.a + self.b * self.c
    }
}

/// Directed long-range coupling `M^{dagger E} = d M^E_from(t - delay)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub d: f64,
    /// Delay in epochs.
    pub delay: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmniRegionNet {
    pub column: ColumnParams,
    pub electrodes: Vec<Electrode>,
    #[serde(default)]
    pub edges: Vec<Edge>,
    /// Epoch length, in the same time unit as `column.tau`.
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

/// Edge with resolved endpoints.
#[derive(Debug, Clone, Copy)]
struct Link {
    from: usize,
    to: usize,
    d: f64,
    delay: usize,
}

/// `m` (uV per time unit) and `sigma^2` (uV^2 per time unit).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectrodeMoments {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodReport {
    pub log_likelihood: f64,
    /// Conditional densities summed over.
    pub points: usize,
    /// Recovered firings that fell outside their range and were clamped.
    pub clamped: usize,
    /// Recovered firings examined.
    pub recovered: usize,
    /// Total distance, in firings, by which recovered values left range.
    pub out_of_range: f64,
}

impl LikelihoodReport {
    pub fn clamp_fraction(&self) -> f64 {
        if self.recovered == 0 {
            0.0
        } else {
            self.clamped as f64 / self.recovered as f64
        }
    }

    /// More than 1% of recovered firings needed clamping.
    pub fn out_of_range_flag(&self) -> bool {
        self.clamp_fraction() > 0.01
    }
}

impl SmniRegionNet {
    pub fn new(column: ColumnParams, electrodes: Vec<Electrode>, edges: Vec<Edge>, dt: f64) -> Result<Self> {
        let net = Self { column, electrodes, edges, dt };
        net.validate()?;
        Ok(net)
    }

    /// The five-site P300 circuit: Fz -> Cz -> Pz with one-epoch relays and
    /// Pz -> {P3, P4} with two-epoch branches.
    pub fn p300(column: ColumnParams, electrodes: [Electrode; 5], d: [f64; 4]) -> Result<Self> {
        let names: Vec<String> = electrodes.iter().map(|e| e.name.clone()).collect();
        let edge = |from: usize, to: usize, d: f64, delay: usize| Edge {
            from: names[from].clone(),
            to: names[to].clone(),
            d,
            delay,
        };
        let edges = vec![edge(0, 1, d[0], 1), edge(1, 2, d[1], 1), edge(2, 3, d[2], 2), edge(2, 4, d[3], 2)];
        Self::new(column, electrodes.to_vec(), edges, DEFAULT_DT)
    }

    pub fn validate(&self) -> Result<()> {
        self.column.check()?;
        if self.electrodes.is_empty() {
            return Err(Error::InvalidInput("net has no electrodes".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidInput("dt must be positive".into()));
        }
        let links = self.links()?;
        // zero-delay edges must not form a cycle
        let n = self.electrodes.len();
        let mut indegree = vec![0usize; n];
        for l in links.iter().filter(|l| l.delay == 0) {
            indegree[l.to] += 1;
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = ready.pop() {
            seen += 1;
            for l in links.iter().filter(|l| l.delay == 0 && l.from == i) {
                indegree[l.to] -= 1;
                if indegree[l.to] == 0 {
                    ready.push(l.to);
                }
            }
        }
        if seen != n {
            return Err(Error::InvalidInput("zero-delay edges form a cycle".into()));
        }
        Ok(())
    }

    fn index(&self) -> HashMap<&str, usize> {
        self.electrodes.iter().enumerate().map(|(i, e)| (e.name.as_str(), i)).collect()
    }

    fn links(&self) -> Result<Vec<Link>> {
        let index = self.index();
        if index.len() != self.electrodes.len() {
            return Err(Error::InvalidInput("duplicate electrode names".into()));
        }
        self.edges
            .iter()
            .map(|e| {
                let find = |name: &str| {
                    index
                        .get(name)
                        .copied()
                        .ok_or_else(|| Error::InvalidInput(format!("edge refers to unknown electrode {name}")))
                };
                Ok(Link { from: find(&e.from)?, to: find(&e.to)?, d: e.d, delay: e.delay })
            })
            .collect()
    }

    pub fn max_delay(&self) -> usize {
        self.edges.iter().map(|e| e.delay).max().unwrap_or(0)
    }

    pub fn electrode_index(&self, name: &str) -> Option<usize> {
        self.electrodes.iter().position(|e| e.name == name)
    }

    /// Fit-able coordinates, named `site.phi`, `site.a`, `site.b`, `site.c`
    /// per electrode and `from->to.d` per edge.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for e in &self.electrodes {
            for field in ["phi", "a", "b", "c"] {
                names.push(format!("{}.{field}", e.name));
            }
        }
        for e in &self.edges {
            names.push(format!("{}->{}.d", e.from, e.to));
        }
        names
    }

    pub fn parameters(&self) -> Vec<f64> {
        let mut values = Vec::new();
        for e in &self.electrodes {
            values.extend_from_slice(&[e.phi, e.a, e.b, e.c]);
        }
        values.extend(self.edges.iter().map(|e| e.d));
        values
    }

    pub fn with_parameters(&self, values: &[f64]) -> Result<Self> {
        let expected = 4 * self.electrodes.len() + self.edges.len();
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, actual: values.len() });
        }
        let mut net = self.clone();
        for (i, e) in net.electrodes.iter_mut().enumerate() {
            e.phi = values[4 * i];
            e.a = values[4 * i + 1];
            e.b = values[4 * i + 2];
            e.c = values[4 * i + 3];
        }
        let offset = 4 * self.electrodes.len();
        for (j, e) in net.edges.iter_mut().enumerate() {
            e.d = values[offset + j];
        }
        Ok(net)
    }

    /// Column parameters after the centering shift. Shifts depend on the
    /// synaptic constants only, so they are recomputed for every net.
    pub fn centered_column(&self) -> Result<ColumnParams> {
        self.column.centered()
    }

    fn check_series(&self, data: &[Vec<f64>]) -> Result<usize> {
        if data.len() != self.electrodes.len() {
            return Err(Error::DimensionMismatch { expected: self.electrodes.len(), actual: data.len() });
        }
        let len = data[0].len();
        if data.iter().any(|s| s.len() != len) {
            return Err(Error::LengthMismatch("electrode series differ in length".into()));
        }
        if len < self.max_delay() + 2 {
            return Err(Error::LengthMismatch(format!(
                "series of {len} epochs is shorter than max delay + 2 = {}",
                self.max_delay() + 2
            )));
        }
        Ok(len)
    }
}

/// Sum over incoming edges of `d M^E_from(t - delay)`, zero before the
/// start of `history` (indexed `[electrode][epoch]`).
pub fn delayed_afferents(net: &SmniRegionNet, history: &[Vec<f64>], target: usize, t: usize) -> Result<f64> {
    Ok(afferent(&net.links()?, history, target, t))
}

fn afferent(links: &[Link], history: &[Vec<f64>], target: usize, t: usize) -> f64 {
    links
        .iter()
        .filter(|l| l.to == target)
        .map(|l| if t >= l.delay { l.d * history[l.from][t - l.delay] } else { 0.0 })
        .sum()
}

/// Potential moments at the prepoint excitatory firing `m_e` with summed
/// afferent `m_long`, using (already centered) `column`.
pub fn electrode_moments(
    column: &ColumnParams,
    electrode: &Electrode,
    m_e: f64,
    m_long: f64,
) -> Result<ElectrodeMoments> {
    let s = Firings { excitatory: m_e, inhibitory: electrode.c * m_e, long_range: m_long };
    let f = column.threshold_factor(&s)?;
    let dd = column.drifts_diffusions(f, &s);
    Ok(ElectrodeMoments {
        mean: electrode.a * dd.drift[E] + electrode.b * dd.drift[I],
        variance: electrode.a * electrode.a * dd.diffusion[E] + electrode.b * electrode.b * dd.diffusion[I],
    })
}

/// `ln[(2 pi sigma^2 dt)^{-1/2} exp(-L dt)]`, `L = (Phidot - m)^2 / (2 sigma^2)`.
pub fn conditional_logprob(phi_next: f64, phi_now: f64, moments: ElectrodeMoments, dt: f64) -> Result<f64> {
    if !(moments.variance > 0.0) {
        return Err(Error::DegenerateVariance(moments.variance));
    }
    let rate = (phi_next - phi_now) / dt;
    let lagrangian = (rate - moments.mean).powi(2) / (2.0 * moments.variance);
    Ok(-0.5 * (2.0 * PI * moments.variance * dt).ln() - lagrangian * dt)
}

/// Recovered excitatory firings per electrode, clamped so that both
/// `|M^E| <= N^E` and `|c M^E| <= N^I`.
struct Recovery {
    firings: Vec<Vec<f64>>,
    clamped: usize,
    out_of_range: f64,
}

fn recover_firings(net: &SmniRegionNet, data: &[Vec<f64>]) -> Result<Recovery> {
    let [ne, ni] = net.column.neurons;
    let mut clamped = 0;
    let mut out_of_range = 0.0;
    let mut firings = Vec::with_capacity(data.len());
    for (e, series) in net.electrodes.iter().zip(data) {
        let gain = e.gain();
        if gain == 0.0 || !gain.is_finite() {
            return Err(Error::SingularInversion(format!("a + b c vanishes at {}", e.name)));
        }
        let limit = if e.c == 0.0 { ne } else { ne.min(ni / e.c.abs()) };
        firings.push(
            series
                .iter()
                .map(|&p| {
                    let m = (p - e.phi) / gain;
                    if m.abs() > limit {
                        clamped += 1;
                        out_of_range += m.abs() - limit;
                        m.clamp(-limit, limit)
                    } else {
                        m
                    }
                })
                .collect(),
        );
    }
    Ok(Recovery { firings, clamped, out_of_range })
}

/// Per-transition terms: conditional log densities and standardized
/// innovations, one row per electrode, starting at
/// epoch `max_delay`.
struct Transitions {
    logprob: Vec<Vec<f64>>,
    innovation: Vec<Vec<f64>>,
    recovery: Recovery,
}

fn transitions(net: &SmniRegionNet, data: &[Vec<f64>]) -> Result<Transitions> {
    let len = net.check_series(data)?;
    let column = net.centered_column()?;
    let links = net.links()?;
    let recovery = recover_firings(net, data)?;
    let start = net.max_delay();
    let mut logprob = Vec::with_capacity(data.len());
    let mut innovation = Vec::with_capacity(data.len());
    for (v, e) in net.electrodes.iter().enumerate() {
        let mut lp = Vec::with_capacity(len - start - 1);
        let mut inn = Vec::with_capacity(len - start - 1);
        for t in start..len - 1 {
            let m_long = afferent(&links, &recovery.firings, v, t);
            let mom = electrode_moments(&column, e, recovery.firings[v][t], m_long)?;
            lp.push(conditional_logprob(data[v][t + 1], data[v][t], mom, net.dt)?);
            let rate = (data[v][t + 1] - data[v][t]) / net.dt;
            inn.push((rate - mom.mean) * net.dt.sqrt() / mom.variance.sqrt());
        }
        logprob.push(lp);
        innovation.push(inn);
    }
    Ok(Transitions { logprob, innovation, recovery })
}

/// Total log likelihood over electrodes and epochs, with recovery stats.
/// Series is indexed `[electrode][epoch]`; the first `max_delay` epochs
/// serve only as afferent history.
pub fn likelihood_report(net: &SmniRegionNet, data: &[Vec<f64>]) -> Result<LikelihoodReport> {
    let tr = transitions(net, data)?;
    let per_electrode: Vec<f64> = tr.logprob.iter().map(|lp| pairwise_sum(lp)).collect();
    Ok(LikelihoodReport {
        log_likelihood: per_electrode.iter().sum(),
        points: tr.logprob.iter().map(Vec::len).sum(),
        clamped: tr.recovery.clamped,
        recovered: data.iter().map(Vec::len).sum(),
        out_of_range: tr.recovery.out_of_range,
    })
}

pub fn joint_loglikelihood(net: &SmniRegionNet, data: &[Vec<f64>]) -> Result<f64> {
    Ok(likelihood_report(net, data)?.log_likelihood)
}

/// `(Phidot - m) sqrt(dt) / sigma` per electrode; i.i.d. standard normal
/// when the net describes the data.
pub fn standardized_innovations(net: &SmniRegionNet, data: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    Ok(transitions(net, data)?.innovation)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    /// Multiplies the diffusion term; 0 follows the drift exactly.
    pub noise_scale: f64,
    /// Starting `M^E` per electrode; zero when absent.
    pub initial_firings: Option<Vec<f64>>,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self { noise_scale: 1.0, initial_firings: None }
    }
}

/// Euler-Maruyama path of the potentials, `[electrode][epoch]`.
pub fn simulate(net: &SmniRegionNet, epochs: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    simulate_with(net, epochs, seed, &SimulateOptions::default())
}

pub fn simulate_with(net: &SmniRegionNet, epochs: usize, seed: u64, opts: &SimulateOptions) -> Result<Vec<Vec<f64>>> {
    net.validate()?;
    if epochs == 0 {
        return Err(Error::InvalidInput("simulate needs at least one epoch".into()));
    }
    let n = net.electrodes.len();
    let column = net.centered_column()?;
    let links = net.links()?;
    let [ne, ni] = net.column.neurons;
    let mut limits = Vec::with_capacity(n);
    for e in &net.electrodes {
        if e.gain() == 0.0 {
            return Err(Error::SingularInversion(format!("a + b c vanishes at {}", e.name)));
        }
        limits.push(if e.c == 0.0 { ne } else { ne.min(ni / e.c.abs()) });
    }
    let mut firings = vec![Vec::with_capacity(epochs); n];
    match &opts.initial_firings {
        Some(init) if init.len() != n => return Err(Error::DimensionMismatch { expected: n, actual: init.len() }),
        Some(init) => {
            for v in 0..n {
                firings[v].push(init[v].clamp(-limits[v], limits[v]));
            }
        }
        None => firings.iter_mut().for_each(|f| f.push(0.0)),
    }
    let mut normals = NormalStream::new(seed, 0);
    let sqrt_dt = net.dt.sqrt();
    for t in 0..epochs - 1 {
        for v in 0..n {
            let e = &net.electrodes[v];
            let m_long = afferent(&links, &firings, v, t);
            let mom = electrode_moments(&column, e, firings[v][t], m_long)?;
            let z = normals.next_normal();
            let d_phi = mom.mean * net.dt + opts.noise_scale * mom.variance.sqrt() * sqrt_dt * z;
            let next = firings[v][t] + d_phi / e.gain();
            firings[v].push(next.clamp(-limits[v], limits[v]));
        }
    }
    Ok(net.electrodes.iter().zip(&firings).map(|(e, f)| f.iter().map(|m| e.phi + e.gain() * m).collect()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenteringRow {
    pub electrode: String,
    pub mean_e: f64,
    pub rms_e: f64,
    pub mean_i: f64,
    pub rms_i: f64,
    /// `|mean| > 0.1 N^G` for either population.
    pub flagged: bool,
}

/// Filter the data through the net and summarize recovered firings.
pub fn centering_check(net: &SmniRegionNet, data: &[Vec<f64>]) -> Result<Vec<CenteringRow>> {
    net.check_series(data)?;
    let recovery = recover_firings(net, data)?;
    let [ne, ni] = net.column.neurons;
    Ok(net
        .electrodes
        .iter()
        .zip(&recovery.firings)
        .map(|(e, m)| {
            let len = m.len() as f64;
            let mean_e = pairwise_sum(m) / len;
            let sq: Vec<f64> = m.iter().map(|v| v * v).collect();
            let rms_e = (pairwise_sum(&sq) / len).sqrt();
            let mean_i = e.c * mean_e;
            let rms_i = e.c.abs() * rms_e;
            CenteringRow {
                electrode: e.name.clone(),
                mean_e,
                rms_e,
                mean_i,
                rms_i,
                flagged: mean_e.abs() > 0.1 * ne || mean_i.abs() > 0.1 * ni,
            }
        })
        .collect())
}
