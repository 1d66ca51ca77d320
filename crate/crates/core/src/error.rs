use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown landscape `{0}`")]
    Catalog(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("point lies outside the certificate scope: {0}")]
    OutOfScope(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Non-finite iterate. `replicate` is set when raised from an ensemble.
    #[error("iterate became non-finite at step {step}{}", replicate.map(|r| format!(" (replicate {r})")).unwrap_or_default())]
    Divergence { step: u64, replicate: Option<usize> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("hypothesis not met: {0}")]
    Hypothesis(String),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}
