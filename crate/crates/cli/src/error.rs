use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },

    #[error("{origin}: invalid configuration:\n  - {}", problems.join("\n  - "))]
    Validation { origin: String, problems: Vec<String> },

    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error(transparent)]
    Run(#[from] mpfc_core::MpfcError),
}

impl CliError {
    pub fn schema(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}
