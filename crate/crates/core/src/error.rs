use alloc::string::String;

/// Errors raised by the models, filters and gain-design routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },
    #[error("matrix is singular or too ill-conditioned (condition estimate {condition:e})")]
    SingularMatrix { condition: f64 },
    #[error("transmit-scale calibration failed: {0}")]
    Calibration(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dims(op: &'static str, expected: (usize, usize), got: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            op,
            expected: alloc::format!("{}x{}", expected.0, expected.1),
            got: alloc::format!("{}x{}", got.0, got.1),
        }
    }
}
