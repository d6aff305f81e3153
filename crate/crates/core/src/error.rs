use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape {0} is not ordinary smooth with non-degenerate bounds (requires shape < 1)")]
    UnsupportedShape(f64),

    #[error("degenerate support: normalizing integral {0:e} is below the underflow floor")]
    DegenerateSupport(f64),

    #[error("measure undefined at z = {0}: z coincides with a data point")]
    UndefinedPoint(f64),

    #[error("z = {0} excluded: every noise weight underflows to zero")]
    ExcludedPoint(f64),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("scale calibration failed for shape {shape}: {reason}")]
    CalibrationFailure { shape: f64, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("every shape in the grid failed calibration")]
    EmptyFrontier,

    #[error("study invalid: {dropped} of {total} replications failed")]
    StudyInvalid { dropped: usize, total: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
