use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ebhmm_core::Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(ebhmm_core::Error::Io(e.into()))
    }
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Config(_) => "config",
            CliError::Usage(_) => "usage",
        }
    }

    /// One exit code per error kind; 1 is left to panics.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "usage" => 2,
            "format" => 10,
            "validation" => 11,
            "schema" => 12,
            "argument" => 13,
            "mixture_fit" => 14,
            "numerical_degeneracy" => 15,
            "embedding" => 16,
            "timeline" => 17,
            "baseline" => 18,
            "evaluation" => 19,
            "io" => 20,
            "json" => 21,
            "config" => 22,
            _ => 1,
        }
    }

    /// The object written to standard error.
    pub fn to_json(&self) -> String {
        json!({
            "error": {
                "kind": self.kind(),
                "exit_code": self.exit_code(),
                "message": self.to_string(),
            }
        })
        .to_string()
    }
}
