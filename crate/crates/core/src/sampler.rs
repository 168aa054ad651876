//! Correlated event sampling.
//!
//! Events are drawn in lanes of [`LANE_EVENTS`] consecutive events. Lane `l`
//! reads ChaCha8 stream `l` under the batch seed, so the batch is identical
//! whether lanes run on one thread or many.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::copula::CopulaModel;
use crate::linalg::Matrix;
use crate::special::norm_quantile;
use crate::Result;

pub use crate::linalg::cholesky;

/// Events per deterministic sub-stream.
pub const LANE_EVENTS: usize = 4096;

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

/// Uniform draws on the open interval (0, 1) from a counter-based stream.
#[derive(Debug, Clone)]
pub struct UniformStream {
    rng: ChaCha8Rng,
}

impl UniformStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Midpoint of one of 2^53 equal cells, never 0 or 1.
    pub fn next_open01(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * TWO_POW_M53
    }

    /// Uniform on the half-open interval [0, 1).
    pub fn next_unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * TWO_POW_M53
    }
}

/// Standard normal draws by inverse cdf of [`UniformStream`] output.
#[derive(Debug, Clone)]
pub struct NormalStream {
    uniform: UniformStream,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { uniform: UniformStream::new(seed, stream) }
    }

    pub fn next_normal(&mut self) -> f64 {
        norm_quantile(self.uniform.next_open01())
    }
}

impl Iterator for NormalStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_normal())
    }
}

pub fn standard_normal_stream(seed: u64) -> NormalStream {
    NormalStream::new(seed, 0)
}

/// Matched draws: `dz` i.i.d. standard normal, `dy = dz C^T` row-wise, and
/// `dx` mapped back through each marginal. All matrices are `n x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventBatch {
    pub seed: u64,
    pub dz: Matrix,
    pub dy: Matrix,
    pub dx: Matrix,
}

impl EventBatch {
    pub fn len(&self) -> usize {
        self.dx.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dimension(&self) -> usize {
        self.dx.cols()
    }

    pub fn dx_column(&self, j: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.dx[(i, j)]).collect()
    }

    pub fn dy_column(&self, j: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.dy[(i, j)]).collect()
    }
}

/// Draw `n` events from `model` under `seed`.
pub fn sample_events(model: &CopulaModel, n: usize, seed: u64) -> Result<EventBatch> {
    if n == 0 {
        return Err(crate::Error::InvalidInput("event count must be at least 1".into()));
    }
    let dim = model.dimension();
    let c = model.correlation().cholesky_factor();
    let lanes = n.div_ceil(LANE_EVENTS);

    let lane_rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..lanes)
        .into_par_iter()
        .map(|lane| {
            let start = lane * LANE_EVENTS;
            let count = LANE_EVENTS.min(n - start);
            let mut normals = NormalStream::new(seed, lane as u64);
            let mut dz = Vec::with_capacity(count * dim);
            let mut dy = Vec::with_capacity(count * dim);
            let mut dx = Vec::with_capacity(count * dim);
            let mut z = vec![0.0; dim];
            for _ in 0..count {
                z.iter_mut().for_each(|v| *v = normals.next_normal());
                for i in 0..dim {
                    let mut y = 0.0;
                    for k in 0..=i {
                        y += c[(i, k)] * z[k];
                    }
                    dy.push(y);
                    dx.push(model.marginals()[i].from_gaussian(y));
                }
                dz.extend_from_slice(&z);
            }
            (dz, dy, dx)
        })
        .collect();

    let mut dz = Vec::with_capacity(n * dim);
    let mut dy = Vec::with_capacity(n * dim);
    let mut dx = Vec::with_capacity(n * dim);
    for (z, y, x) in lane_rows {
        dz.extend(z);
        dy.extend(y);
        dx.extend(x);
    }
    Ok(EventBatch {
        seed,
        dz: Matrix::from_row_major(n, dim, dz)?,
        dy: Matrix::from_row_major(n, dim, dy)?,
        dx: Matrix::from_row_major(n, dim, dx)?,
    })
}
