use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] isofit_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("config: {0}")]
    ConfigWrite(#[from] toml::ser::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => "Io",
            CliError::ConfigParse(_) | CliError::ConfigWrite(_) | CliError::Config(_) => "InvalidConfig",
            CliError::Csv(_) => "Csv",
            CliError::Json(_) => "Json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
