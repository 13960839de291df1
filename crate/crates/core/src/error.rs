use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("refusing to enumerate {count} segmentations (cap {cap})")]
    TooManySegmentations { count: u128, cap: u128 },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
