use thiserror::Error;

/// Errors produced by the numeric layer, the models and the file formats.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NaraError {
    #[error("non-finite input")]
    NonFinite,

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("diverged: {0}")]
    Diverged(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("backward called before forward")]
    NoForward,

    #[error("{0} untrained")]
    Untrained(&'static str),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("zero-probability factor in {0}")]
    ZeroProbability(&'static str),

    #[error("enumeration too large: {paths} paths exceeds bound {bound}")]
    EnumerationTooLarge { paths: u128, bound: u128 },

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error: {0}")]
    Io(String),
}

impl NaraError {
    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        NaraError::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

impl From<std::io::Error> for NaraError {
    fn from(e: std::io::Error) -> Self {
        NaraError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, NaraError>;
