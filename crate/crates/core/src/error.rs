use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A required CSV column is absent.
    #[error("missing required column `{0}`")]
    MissingColumn(String),

    /// A cell could not be parsed; carries the 1-based data row index.
    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// Caller violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Vector/matrix widths do not line up.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    /// Artifact document is structurally valid JSON but not a usable model.
    #[error("bad model artifact: {0}")]
    Artifact(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
