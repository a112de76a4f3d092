//! Error type of the lab front end.

use std::path::PathBuf;

use reclab_core::CoreError;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{file}:{line}: {message}")]
    Format { file: PathBuf, line: u64, message: String },

    #[error("missing artifact {path}: run `{produced_by}` first")]
    MissingArtifact { path: PathBuf, produced_by: String },

    #[error("artifact {path} was produced under config hash {found}, current is {expected}")]
    ManifestMismatch { path: PathBuf, found: String, expected: String },

    #[error("strict mode: {0}")]
    Strict(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl LabError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> LabError {
        let path = path.into();
        move |source| LabError::Io { path, source }
    }

    /// Exit status for the CLI: 2 config problems, 3 missing/mismatched
    /// artifacts, 1 everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            LabError::MissingArtifact { .. } | LabError::ManifestMismatch { .. } => 3,
            _ => 1,
        }
    }

    /// Short machine-readable kind tag.
    pub fn kind(&self) -> &'static str {
        match self {
            LabError::Io { .. } => "io",
            LabError::Csv { .. } => "csv",
            LabError::Config(_) => "config",
            LabError::Format { .. } => "format",
            LabError::MissingArtifact { .. } => "missing_artifact",
            LabError::ManifestMismatch { .. } => "manifest_mismatch",
            LabError::Strict(_) => "strict",
            LabError::Core(_) => "core",
            LabError::Json { .. } => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
