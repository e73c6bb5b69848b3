use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a precondition (bad dimension, non-Hermitian matrix, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A POVM setting whose effects do not sum to the identity.
    #[error("incomplete POVM: per-setting residuals {residuals:?} exceed {tolerance:e}")]
    Incomplete { residuals: Vec<f64>, tolerance: f64 },

    #[error("schema violation: {0}")]
    Schema(String),

    /// An iterative routine failed to reach its numerical target.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True when the failure is numerical rather than a validation problem.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}
