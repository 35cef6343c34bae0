use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty cohort")]
    EmptyCohort,

    #[error("cohort of {got} is too small, need at least {need}")]
    CohortTooSmall { need: usize, got: usize },

    #[error("cohort size {size} exceeds the {available} available clients")]
    CohortTooLarge { size: usize, available: usize },

    #[error("unknown field `{0}`")]
    UnknownField(String),

    #[error("missing field `{0}`")]
    MissingField(&'static str),

    #[error("invariant violated for `{field}`: {bound}")]
    InvariantViolation { field: &'static str, bound: &'static str },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("no attack configured for role {0}")]
    UnknownRole(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

impl Error {
    pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, got })
        }
    }
}
