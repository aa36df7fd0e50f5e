use thiserror::Error;

pub type Result<T, E = RunError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] dnls_core::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("gate failed: {0}")]
    Gate(String),
}

impl RunError {
    /// Process exit code: 2 for bad input, 3 for numerical failure, 4 for a failed gate, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Core(e) if e.is_numerical() => 3,
            RunError::Core(dnls_core::Error::Io(_)) | RunError::Io(_) => 1,
            RunError::Core(_) | RunError::Config(_) | RunError::Toml(_) | RunError::Json(_) => 2,
            RunError::Gate(_) => 4,
        }
    }
}
