use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error: {0}")]
    Numeric(String),

    #[error("invalid diffeomorphism: {0}")]
    InvalidDiffeo(String),

    #[error("geodesic trapped: no boundary exit within arclength {length}")]
    TrappedGeodesic { length: f64 },

    #[error("shooting failed after {iterations} iterations (endpoint mismatch {mismatch:.3e})")]
    ShootingFailure { iterations: usize, mismatch: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("incomplete broken scattering table: missing entry ({0}, {1})")]
    IncompleteTable(usize, usize),

    #[error("ambiguous scattering relation at direction {index}: best Jaccard distance {best:.4}")]
    AmbiguousScattering { index: usize, best: f64 },

    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            field: field.into(),
            message: message.into(),
        }
    }
}
