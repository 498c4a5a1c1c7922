use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("audit failure: {0}")]
    Audit(String),

    #[error(transparent)]
    Core(#[from] advice_learn_core::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("result file: {0}")]
    Format(String),
}

impl CliError {
    /// 1 for usage and config problems, 2 for failed audits or checks.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Audit(_) | CliError::Core(advice_learn_core::Error::Audit(_)) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
