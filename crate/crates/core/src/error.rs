use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("sublattice is not contained in the given superlattice")]
    NotContained,

    #[error("parse error at {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error("signature mismatch: {0}")]
    Signature(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("type mismatch: {0}")]
    TypeMismatch(String),

    #[error("basis incomplete: {0}")]
    BasisIncomplete(String),

    #[error("structure too large for exhaustive search: |A| = {size} exceeds limit {limit}")]
    SizeLimit { size: u64, limit: u64 },
}

impl Error {
    pub(crate) fn dims(expected: usize, found: usize) -> Self {
        Error::DimensionMismatch { expected, found }
    }

    pub(crate) fn parse(position: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            position,
            message: message.into(),
        }
    }

    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
