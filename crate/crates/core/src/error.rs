use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("argument {value} outside domain {domain}")]
    OutOfDomain { value: f64, domain: &'static str },

    #[error("ill-conditioned correlation matrix: pivot {pivot:e} at index {index}")]
    IllConditioned { index: usize, pivot: f64 },

    #[error("window too short: {epochs} epochs after pre-averaging for {channels} channels")]
    WindowTooShort { epochs: usize, channels: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix not positive definite: pivot {pivot:e} at index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("portfolio capital is zero")]
    ZeroCapital,

    #[error("risk constraint unsatisfiable: best cost_q {cost_q} exceeds tolerance {tolerance}")]
    ConstraintUnsatisfiable { cost_q: f64, tolerance: f64 },

    #[error("invalid bounds for parameter {index}: [{lower}, {upper}]")]
    InvalidBounds { index: usize, lower: f64, upper: f64 },

    #[error("cost is not finite at the initial point")]
    CostNotFinite,

    #[error("non-positive threshold denominator for population {population}")]
    NonPositiveDenominator { population: &'static str },

    #[error("centering shift has no solution: {0}")]
    NoSolution(String),

    #[error("degenerate variance {0:e}")]
    DegenerateVariance(f64),

    #[error("singular potential inversion at electrode {0}: a + b*c = 0")]
    SingularInversion(String),

    #[error("series length mismatch: {0}")]
    LengthMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
