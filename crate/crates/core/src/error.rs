use thiserror::Error;

/// Errors raised by the tvvar library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TvvarError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("numerical breakdown at t={t}: {msg}")]
    Numerical { t: usize, msg: String },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("infeasible target return: f'Q^-1 f = {0:e} is below tolerance")]
    InfeasibleTarget(f64),

    #[error("degenerate portfolio constraints: determinant {0:e} is below tolerance")]
    DegenerateConstraints(f64),

    #[error("explosive trajectory at t={t} (|y| = {norm:e}, seed {seed})")]
    Explosive { t: usize, norm: f64, seed: u64 },

    #[error("data error at row {row}, column {column}: {msg}")]
    Data { row: usize, column: String, msg: String },

    #[error("csv error: {0}")]
    Csv(String),

    #[error("io error: {0}")]
    Io(String),
}

impl TvvarError {
    /// True for errors caused by malformed or inadequate input data.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            TvvarError::Data { .. }
                | TvvarError::Csv(_)
                | TvvarError::Io(_)
                | TvvarError::InsufficientData { .. }
                | TvvarError::Dimension(_)
        )
    }

    /// True for errors caused by floating-point breakdown or degenerate
    /// linear algebra.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            TvvarError::Numerical { .. }
                | TvvarError::NotPositiveDefinite(_)
                | TvvarError::InfeasibleTarget(_)
                | TvvarError::DegenerateConstraints(_)
                | TvvarError::Explosive { .. }
        )
    }
}

impl From<std::io::Error> for TvvarError {
    fn from(e: std::io::Error) -> Self {
        TvvarError::Io(e.to_string())
    }
}

impl From<csv::Error> for TvvarError {
    fn from(e: csv::Error) -> Self {
        TvvarError::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, TvvarError>;
