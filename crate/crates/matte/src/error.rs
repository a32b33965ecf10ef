use thiserror::Error;

/// Errors produced by the matte library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its documented range (even kernel, bad window size, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two grids that must share dimensions do not.
    #[error("dimension mismatch: expected {expected_height}x{expected_width}, got {actual_height}x{actual_width}")]
    DimensionMismatch {
        expected_height: usize,
        expected_width: usize,
        actual_height: usize,
        actual_width: usize,
    },

    /// Input data violates a type invariant (value out of the unit
    /// interval, wrong buffer length, ...).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// The input is structurally valid but degenerate for the requested operation
    /// (empty region, image smaller than a filter support, ...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A loss or gradient evaluated to a non-finite value during optimization.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parameter(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::InvalidData(msg.into())
    }
}

pub(crate) fn check_same_dims(
    expected: (usize, usize),
    actual: (usize, usize),
) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            expected_height: expected.0,
            expected_width: expected.1,
            actual_height: actual.0,
            actual_width: actual.1,
        });
    }
    Ok(())
}
