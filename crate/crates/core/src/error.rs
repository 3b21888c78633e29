use thiserror::Error;

/// Errors produced by state construction, tensor handling and the criteria.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid arity: {0}")]
    Arity(String),
    #[error("value outside its domain: {0}")]
    Domain(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("cannot parse `{spec}`: {reason}")]
    Parse { spec: String, reason: String },
    #[error("enumeration over {bits} binary choices exceeds the limit of {limit}")]
    TooLarge { bits: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
