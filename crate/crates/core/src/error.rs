use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("malformed dataset: {0}")]
    Dataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite coefficient in {0}")]
    NonFinite(String),

    /// The LP relaxation of a model is unbounded. Verification models are
    /// always bounded, so this points at an encoding defect upstream.
    #[error("LP relaxation is unbounded")]
    UnboundedRelaxation,

    #[error("inconsistent bounds: {0}")]
    InconsistentBounds(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
