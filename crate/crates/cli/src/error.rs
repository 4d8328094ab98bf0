use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("{context}: {source}")]
    Runtime {
        context: String,
        #[source]
        source: geomc::Error,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    /// 1 for usage and validation, 2 for runtime failures, 3 when a
    /// verification check fails.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Invalid(_) => 1,
            CliError::Runtime { .. } | CliError::Io { .. } => 2,
            CliError::Verification(_) => 3,
        }
    }

    pub fn invalid(field: &str, err: impl std::fmt::Display) -> Self {
        CliError::Invalid(format!("{field}: {err}"))
    }

    pub fn runtime(context: impl Into<String>, source: geomc::Error) -> Self {
        CliError::Runtime { context: context.into(), source }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type CliResult<T> = Result<T, CliError>;
