use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("field `{field}` is not finite")]
    NonFinite { field: String },

    #[error("invalid value for `{field}`: {reason}")]
    InvalidField { field: String, reason: String },

    #[error("feature `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("unknown subgroup `{0}`")]
    UnknownSubgroup(String),

    #[error("unknown model variant `{0}`")]
    UnknownVariant(String),

    #[error("schema mismatch: expected width {expected}, found {found}")]
    SchemaMismatch { expected: usize, found: usize },

    #[error("invalid testing design: {0}")]
    InvalidDesign(String),

    #[error("negative treatment {0}")]
    NegativeTreatment(f64),

    #[error(
        "design matrix is singular (column `{0}` is collinear); use L1 or L2 regularization"
    )]
    Singular(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("input drift: {0}")]
    Drift(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of the filesystem rather than of the inputs' content.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Csv(e) => matches!(e.kind(), csv::ErrorKind::Io(_)),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
