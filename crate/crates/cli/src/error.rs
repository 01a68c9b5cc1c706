use std::path::Path;

use serde_json::json;
use smilescope_service::ServiceError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] smilescope_core::Error),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    Usage(String),
    #[error("malformed input {path}: {reason}")]
    MalformedInput { path: String, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn malformed(path: &Path, reason: impl ToString) -> Self {
        CliError::MalformedInput {
            path: path.display().to_string(),
            reason: reason.to_string(),
        }
    }

    pub fn code(&self) -> String {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Service(e) => format!("service.{}", e.code()),
            CliError::InvalidConfig(_) => "cli.InvalidConfig".into(),
            CliError::Usage(_) => "cli.Usage".into(),
            CliError::MalformedInput { .. } => "cli.MalformedInput".into(),
            CliError::Io { .. } => "cli.Io".into(),
        }
    }

    /// The single-line JSON written to stderr on failure.
    pub fn to_json(&self) -> String {
        json!({ "error": { "code": self.code(), "message": self.to_string() } }).to_string()
    }
}

macro_rules! core_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}

core_from!(
    smilescope_core::CorpusError,
    smilescope_core::SmileError,
    smilescope_core::LearnError,
    smilescope_core::StatsError,
    smilescope_core::NarrativeError,
    smilescope_core::AnalysisError,
    smilescope_core::SynthError
);
