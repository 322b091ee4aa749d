use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("need at least 2 samples for variance estimation, got {0}")]
    TooFewSamples(usize),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: String, iterations: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("parse error at row {row}, column {column:?}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("usage: {0}")]
    Usage(String),

    #[error("{skipped} of {total} replicates failed, more than 10% allowed")]
    TooManySkipped { skipped: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short stable identifier used in machine-parsable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::TooFewSamples(_) => "too_few_samples",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::NoConvergence { .. } => "no_convergence",
            Error::Singular(_) => "singular",
            Error::Parse { .. } => "parse",
            Error::Usage(_) => "usage",
            Error::TooManySkipped { .. } => "too_many_skipped",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}
