use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A record could not be parsed at all.
    #[error("line {line}: malformed record: {message}")]
    Parse { line: usize, message: String },

    /// A record parsed but describes an impossible cascade.
    #[error("{}cascade `{id}`: {reason}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Validation {
        id: String,
        reason: String,
        line: Option<usize>,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite log posterior contribution from cascade `{id}`")]
    NonFinite { id: String },

    #[error("optimizer failed: {message} (at {point:?})")]
    Optimizer { message: String, point: Vec<f64> },

    #[error("sampler failed: {0}")]
    Sampler(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(id: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            id: id.into(),
            reason: reason.into(),
            line: None,
        }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Validation { .. } | Error::Config(_) | Error::Domain(_)
        )
    }
}
