use thiserror::Error;

/// Errors raised by the explanation engine.
#[derive(Debug, Error)]
pub enum Error {
    /// A document (model spec, dataset, request) failed to parse.
    #[error("parse error at {locus}: {message}")]
    Parse { locus: String, message: String },

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    /// A value violates the schema (bounds, category index, integrality).
    #[error("invalid value for feature '{feature}': {message}")]
    InvalidValue { feature: String, message: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unknown model type '{0}'")]
    UnknownModelType(String),

    #[error("unsupported method: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Exact enumeration requested beyond the configured dimension limit.
    #[error("exact mode needs d <= {limit} (got d = {dimension}); use a sampled mode instead")]
    ExactLimitExceeded { dimension: usize, limit: usize },

    #[error("external model protocol error: {message} (payload: {payload:?})")]
    Protocol { message: String, payload: String },

    #[error("batch row {index}: {source}")]
    Batch {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(locus: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            locus: locus.into(),
            message: message.into(),
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::InvalidConfig(message.into())
    }

    /// Feature name or document locus associated with the error, if any.
    pub fn locus(&self) -> Option<String> {
        match self {
            Error::Parse { locus, .. } => Some(locus.clone()),
            Error::InvalidValue { feature, .. } => Some(feature.clone()),
            Error::Batch { index, .. } => Some(format!("row {index}")),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
