use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("risk level must lie in (0, 1), got {0}")]
    InvalidRiskLevel(f64),

    #[error("coefficient of variation undefined: mean is zero")]
    UndefinedCv,

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("need at least {need} candidates, have {have}")]
    NotEnoughCandidates { have: usize, need: usize },

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for configuration and validation failures (as opposed to runtime errors).
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Context { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file not found: {0}")]
    NotFound(PathBuf),

    #[error("failed to parse config: {0}")]
    Parse(String),

    #[error("invalid config: {0}")]
    Validation(String),
}
