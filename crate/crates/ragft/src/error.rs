use std::path::PathBuf;

use ragft_core::ProviderError;

pub type AppResult<T> = std::result::Result<T, AppError>;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {source}")]
    Parse { path: PathBuf, line: usize, source: serde_json::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] ragft_core::Error),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    /// A pipeline stage ran before the stage that produces its input.
    #[error("missing artifact {path} (run `{stage}` first)")]
    MissingArtifact { path: PathBuf, stage: &'static str },
    #[error("{0} exists; pass --force to overwrite")]
    Exists(PathBuf),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0} integrity violation(s)")]
    Verification(usize),
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}
