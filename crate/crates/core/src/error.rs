use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error at row {row}, column '{column}': {message}")]
    Format { row: u64, column: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("mixture fit failed for feature '{feature}': {message}")]
    MixtureFit { feature: String, message: String },

    #[error("numerical degeneracy at visit {visit}: {message}")]
    Degenerate { visit: usize, message: String },

    #[error("matrix '{matrix}' has no real logarithm: {message}")]
    Embedding { matrix: String, message: String },

    #[error("timeline error: {0}")]
    Timeline(String),

    #[error("baseline model error: {0}")]
    Baseline(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Format { .. } => "format",
            Error::Validation(_) => "validation",
            Error::Schema(_) => "schema",
            Error::Argument(_) => "argument",
            Error::MixtureFit { .. } => "mixture_fit",
            Error::Degenerate { .. } => "numerical_degeneracy",
            Error::Embedding { .. } => "embedding",
            Error::Timeline(_) => "timeline",
            Error::Baseline(_) => "baseline",
            Error::Evaluation(_) => "evaluation",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
