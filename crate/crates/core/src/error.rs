use thiserror::Error;

pub type Result<T> = std::result::Result<T, UrnError>;

#[derive(Debug, Error)]
pub enum UrnError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("{op} is not defined for regime {regime}")]
    WrongRegime { op: &'static str, regime: String },

    #[error("lambda is undefined: {0}")]
    LambdaUndefined(&'static str),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("urn mass overflowed the largest finite float at step {step}")]
    Overflow { step: u64 },

    #[error("matrix is numerically singular (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("spectral radius {radius} of the transition operator is not below one")]
    NotContractive { radius: f64 },

    #[error("probability for cluster {cluster}, category {category} is zero")]
    ZeroProbability { cluster: String, category: usize },

    #[error("data format error: {0}")]
    Format(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
