use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gram list is empty")]
    EmptyGramList,

    #[error("duplicate gram {0:?}")]
    DuplicateGram(String),

    #[error("gram {gram:?} contains unit {unit:?} which is not a base unit")]
    UnitOutsideBase { gram: String, unit: char },

    #[error("unit {unit:?} at position {position} is not a base unit")]
    UnknownUnit { unit: char, position: usize },

    #[error("unknown token {0:?}")]
    UnknownToken(String),

    #[error("dimension mismatch: expected {expected} columns, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite logit at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    /// The label cannot be produced in the available number of frames.
    #[error("impossible alignment: {frames} frames, label needs at least {required}")]
    ImpossibleAlignment { frames: usize, required: usize },

    #[error("path space of {bound} exceeds the enumeration cap {cap}")]
    EnumerationCap { bound: u128, cap: u128 },

    #[error("joint loss terms disagree on frame count: {expected} vs {found}")]
    MismatchedFrames { expected: usize, found: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("training diverged at epoch {epoch}, sample {sample}")]
    Diverged { epoch: usize, sample: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyGramList => "empty_gram_list",
            Error::DuplicateGram(_) => "duplicate_gram",
            Error::UnitOutsideBase { .. } => "unit_outside_base",
            Error::UnknownUnit { .. } => "unknown_unit",
            Error::UnknownToken(_) => "unknown_token",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::ImpossibleAlignment { .. } => "impossible_alignment",
            Error::EnumerationCap { .. } => "enumeration_cap",
            Error::MismatchedFrames { .. } => "mismatched_frames",
            Error::InvalidWeights(_) => "invalid_weights",
            Error::Diverged { .. } => "diverged",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
