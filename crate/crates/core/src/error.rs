use thiserror::Error;

/// Errors raised by the geometric and analytic primitives.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The shortest geodesic between two points is not unique (or nearly so).
    #[error("points are on (or within tolerance of) each other's cut locus: distance {distance} >= {limit}")]
    CutLocus { distance: f64, limit: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
