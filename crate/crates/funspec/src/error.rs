use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type for every fallible operation in the crate.
///
/// The CLI maps these onto exit codes: validation/domain errors exit with 2,
/// numeric failures with 3, tolerance failures (CLI-level) with 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: operands live on different grids")]
    GridMismatch,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("operator is not Hermitian (max relative asymmetry {max_asymmetry:.3e})")]
    NotHermitian { max_asymmetry: f64 },

    #[error("operator is indefinite: min eigenvalue {min_eigenvalue:.3e} below tolerance {tolerance:.3e}")]
    Indefinite { min_eigenvalue: f64, tolerance: f64 },

    #[error("lag {lag} out of range (|lag| must be <= {max})")]
    LagOutOfRange { lag: i64, max: i64 },

    #[error("spectral density of a long-memory model is undefined at omega = 0")]
    PoleAtZero,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
