use mmrabi_core::Error as CoreError;
use thiserror::Error;

/// Errors of the runner; each category has its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Resource(String),
    #[error("{0}")]
    Convergence(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Resource(_) => 3,
            CliError::Convergence(_) => 4,
            CliError::Io(_) => 5,
            CliError::Other(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::InvalidParameter(_) => CliError::Parse(msg),
            CoreError::Resource { .. } => CliError::Resource(msg),
            CoreError::Convergence { .. } | CoreError::TruncationBudget { .. } | CoreError::Precision { .. } => {
                CliError::Convergence(msg)
            }
            CoreError::Io(_) | CoreError::Checkpoint(_) => CliError::Io(msg),
            CoreError::Numeric(_) => CliError::Other(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
