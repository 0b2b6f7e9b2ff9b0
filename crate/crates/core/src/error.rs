use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("dimension mismatch: {context} (expected {expected}, got {actual})")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("unknown tag `{0}`")]
    UnknownTag(String),
    #[error("invalid BIO sequence at position {position}: {reason}")]
    InvalidBio { position: usize, reason: String },
    #[error("sentence {sentence}: {reason}")]
    Structure { sentence: usize, reason: String },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("non-finite loss at epoch {epoch}, sentence {sentence}")]
    NonFinite { epoch: usize, sentence: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
