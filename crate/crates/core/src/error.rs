use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Fock cutoff too small for the requested amplitude or evolution.
    #[error("truncation: {0}")]
    Truncation(String),
    /// Superposition norm vanished.
    #[error("null state: {0}")]
    NullState(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// Bad grid, window or parameter.
    #[error("configuration: {0}")]
    Config(String),
    #[error("integrator failure: {0}")]
    Integrator(String),
    /// Empty or constant shot batch.
    #[error("degenerate batch: {0}")]
    Degenerate(String),
    #[error("io: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    /// Failures caused by inputs rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
