use thiserror::Error;

/// Errors raised anywhere in the assessment stack.
#[derive(Debug, Error)]
pub enum CasaError {
    #[error("empty input")]
    EmptyInput,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("argument has a single claim and cannot be assessed")]
    SingleClaimArgument,
    #[error("no negation rule applies to {0:?}")]
    UnhandledSyntax(String),
    #[error("could not parse model response: {0}")]
    UnparseableResponse(String),
    #[error("backend returned only {got} of {wanted} contexts")]
    InsufficientContexts { got: usize, wanted: usize },
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("backend refused request ({status}): {message}")]
    BackendRefused { status: u16, message: String },
    #[error("backend does not return token log-probabilities")]
    LogprobsUnsupported,
    #[error("cache corrupt at line {line}: {reason}")]
    CacheCorrupt { line: usize, reason: String },
    #[error("every sentence of the revised situation entails a premise")]
    EmptyObjection,
    #[error("schema error at record {index}: {reason}")]
    SchemaError { index: usize, reason: String },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("reference text is empty")]
    EmptyReference,
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CasaError {
    /// True for failures of an external model backend (as opposed to bad input).
    pub fn is_backend(&self) -> bool {
        matches!(
            self,
            CasaError::BackendUnavailable(_)
                | CasaError::BackendRefused { .. }
                | CasaError::LogprobsUnsupported
                | CasaError::CacheCorrupt { .. }
        )
    }
}

pub type Result<T, E = CasaError> = std::result::Result<T, E>;
