use thiserror::Error;

pub type Result<T> = std::result::Result<T, QelmError>;

#[derive(Debug, Error)]
pub enum QelmError {
    #[error(transparent)]
    Core(#[from] qelm_core::Error),
    #[error("{0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl QelmError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            QelmError::Core(_) => "invariant",
            QelmError::Config(_) => "config",
            QelmError::Parse { .. } => "parse",
            QelmError::Io { .. } => "io",
            QelmError::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        QelmError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub(crate) fn config_err(msg: impl Into<String>) -> QelmError {
    QelmError::Config(msg.into())
}
