use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-finite value: {0}")]
    NonFinite(&'static str),
    #[error("ill-conditioned mixing system: |pi - alpha| = {gap:e}")]
    IllConditioned { gap: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("insufficient {class} instances: need {needed}, have {available}")]
    InsufficientClass {
        class: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate bandwidth: sample has zero spread")]
    DegenerateBandwidth,
    #[error("no partition of the tuples yields two distinct effective rates")]
    UnsplittableDegenerate,
    #[error("missing label on a sample that requires one")]
    MissingLabel,
    #[error("training diverged at epoch {epoch}: {what}")]
    Diverged { epoch: usize, what: &'static str },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
