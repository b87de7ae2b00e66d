use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("incomplete matrix: no measurement for workload `{workload}` on config `{config}`")]
    IncompleteMatrix { workload: String, config: String },

    #[error("duplicate measurement for workload `{workload}` on config `{config}`")]
    DuplicateMeasurement { workload: String, config: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown {kind} `{id}`")]
    Lookup { kind: &'static str, id: String },

    #[error("cannot encode config `{config}`: unknown family `{family}`")]
    Encoding { config: String, family: String },

    #[error("empty budget: alpha * |S| + ceil(beta * |W|) must be at least 1")]
    EmptyBudget,

    #[error("no arm has been pulled")]
    NoPulledArm,

    #[error("non-PSD kernel: Cholesky factorization failed after jitter retry")]
    NonPsdKernel,

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
