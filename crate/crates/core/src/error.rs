use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("integrality failure: {0}")]
    Integrality(String),
    #[error("divisibility failure: {0}")]
    Divisibility(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("order overflow: jet order {needed} exceeds the allowed maximum {max}")]
    OrderOverflow { needed: usize, max: usize },
    #[error("truncation mismatch: {0}")]
    TruncationMismatch(String),
    #[error("malformed input at line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("relation violated at n={n}: {msg}")]
    RelationViolation { n: usize, msg: String },
    #[error("mismatch at {witness}")]
    Mismatch { witness: String },
}

pub type Result<T> = std::result::Result<T, Error>;
