use thiserror::Error;

/// Errors raised by the separation, detection and metric routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty signal")]
    EmptySignal,
    #[error("invalid STFT configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("length mismatch: {0} vs {1} samples")]
    LengthMismatch(usize, usize),
    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    RateMismatch(u32, u32),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },
    #[error("non-finite value in input")]
    NonFinite,
    #[error("negative entry in a non-negative matrix")]
    NegativeEntry,
    #[error("at least {0} sources are required")]
    TooFewSources(usize),
    #[error("kernel dimensions must be odd, got {0}x{1}")]
    EvenKernel(usize, usize),
    #[error("binarized kernel is empty: no value exceeds threshold {0}; use a lower threshold")]
    EmptyKernel(f64),
    #[error("source has zero energy")]
    ZeroEnergy,
    #[error("references are degenerate (zero or linearly dependent)")]
    DegenerateReferences,
    #[error("frame of {len} samples is too short; need at least {needed}")]
    FrameTooShort { len: usize, needed: usize },
    #[error("missing prerequisite: {0}")]
    MissingPrerequisite(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: &'static str) -> Error {
    Error::InvalidParameter { name, reason }
}
