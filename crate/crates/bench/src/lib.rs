//! Shared fixtures for the engine benchmarks.

use tailcop::smni::{Electrode, SmniRegionNet};
use tailcop::{ColumnParams, CopulaModel, CorrelationMatrix, ExponentialMarginal};

/// `n` channels with alternating widths and a constant 0.3 correlation.
pub fn equicorrelated_model(n: usize) -> CopulaModel {
    let marginals =
        (0..n).map(|i| ExponentialMarginal::new(0.0, if i % 2 == 0 { 0.01 } else { 0.02 }).unwrap()).collect();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.3 }).collect()).collect();
    CopulaModel::new(marginals, CorrelationMatrix::from_rows(&rows).unwrap()).unwrap()
}

pub fn p300_net() -> SmniRegionNet {
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
    .unwrap()
}
