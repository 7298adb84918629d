use std::process::ExitCode;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED_CHECKS: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments, unreadable or invalid config/matrix files.
    #[error("{0}")]
    Usage(String),
    /// Non-finite loss or an optimizer failure mid-run.
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("{0} verification check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::ChecksFailed(_) => EXIT_FAILED_CHECKS,
        }
    }
}

impl From<CliError> for ExitCode {
    fn from(e: CliError) -> Self {
        ExitCode::from(e.exit_code())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
