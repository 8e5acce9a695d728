use alloc::string::String;

/// Errors raised by the calibration and planning core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("probability {0} outside the open interval (0, 1)")]
    InvalidProbability(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("calibration set is empty")]
    EmptyCalibrationSet,
    #[error("conformal region is unbounded (scaling factor is infinite)")]
    UnboundedRegion,
    #[error("scaling factor must be positive and finite, got {0}")]
    InvalidScaling(f64),
    #[error("validation failed for `{field}`: {reason}")]
    Validation { field: String, reason: String },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
