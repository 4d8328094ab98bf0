use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("ill-conditioned input: {0}")]
    IllConditioned(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate direction: affinity {0} is numerically 1, the residual density is undefined")]
    DegenerateDirection(f64),

    #[error("degenerate support: {0}")]
    DegenerateSupport(String),

    #[error("grid covers only {mass:.3e} of the probability mass of the {which} density")]
    Coverage { which: &'static str, mass: f64 },

    #[error("rejection sampler exceeded {0} attempts")]
    EnvelopeFailure(usize),

    #[error("missing capability: {0}")]
    Capability(&'static str),

    #[error("chain is not reversible: {0}")]
    NotReversible(String),

    #[error("chain is reducible: {0}")]
    Reducible(String),

    #[error("singular covariance: {0}")]
    Singular(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
