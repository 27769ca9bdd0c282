use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not positive definite (smallest eigenvalue {lambda_min:e})")]
    NotPositiveDefinite { lambda_min: f64 },

    #[error("tangent vector is based at a different point than the one supplied")]
    BaseMismatch,

    #[error("{op} is not available on the {geometry} geometry")]
    Unsupported {
        op: &'static str,
        geometry: &'static str,
    },

    #[error("infeasible point: {0}")]
    Infeasible(String),

    #[error("retraction failed: {0}")]
    Retraction(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Failures caused by floating-point breakdown rather than misuse.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::NotPositiveDefinite { .. }
                | Error::Infeasible(_)
                | Error::Retraction(_)
                | Error::Singular(_)
        )
    }
}
