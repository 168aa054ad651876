use thiserror::Error;

/// Failure of a command, carrying its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Degenerate(String),
    #[error("{0}")]
    NotPositiveDefinite(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::NotPositiveDefinite(_) => 4,
            CliError::Infeasible(_) => 5,
            CliError::Internal(_) => 10,
        }
    }

    /// Prefix the message, keeping the kind.
    pub fn context(self, what: &str) -> Self {
        let wrap = |m: String| format!("{what}: {m}");
        match self {
            CliError::Parse(m) => CliError::Parse(wrap(m)),
            CliError::Degenerate(m) => CliError::Degenerate(wrap(m)),
            CliError::NotPositiveDefinite(m) => CliError::NotPositiveDefinite(wrap(m)),
            CliError::Infeasible(m) => CliError::Infeasible(wrap(m)),
            CliError::Internal(m) => CliError::Internal(wrap(m)),
        }
    }
}

impl From<tailcop::Error> for CliError {
    fn from(e: tailcop::Error) -> Self {
        use tailcop::Error as E;
        let msg = e.to_string();
        match e {
            E::DegenerateData(_)
            | E::DegenerateVariance(_)
            | E::WindowTooShort { .. }
            | E::NonPositiveDenominator { .. }
            | E::NoSolution(_)
            | E::SingularInversion(_) => CliError::Degenerate(msg),
            E::NotPositiveDefinite { .. } | E::IllConditioned { .. } => CliError::NotPositiveDefinite(msg),
            E::ConstraintUnsatisfiable { .. } => CliError::Infeasible(msg),
            E::OutOfDomain { .. }
            | E::DimensionMismatch { .. }
            | E::ZeroCapital
            | E::InvalidBounds { .. }
            | E::LengthMismatch(_)
            | E::InvalidInput(_) => CliError::Parse(msg),
            E::CostNotFinite => CliError::Internal(msg),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Parse(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
