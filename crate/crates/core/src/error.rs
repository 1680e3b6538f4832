use thiserror::Error;

/// Errors raised anywhere in the imaging pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// The operator mapped an iterate to the zero vector.
    #[error("degenerate operator: {0}")]
    DegenerateOperator(String),

    /// A normalization step was asked to divide by a vanishing norm.
    #[error("degenerate normalization: norm {norm:e} below threshold")]
    DegenerateNormalization { norm: f64 },

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("container format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateOperator(_)
                | Error::DegenerateNormalization { .. }
                | Error::NonFinite(_)
                | Error::Diverged(_)
        )
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        });
    }
    Ok(())
}
