use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] ahcr::Error),
}

impl CliError {
    /// 1 usage, 2 data or format, 3 numeric divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(ahcr::Error::Diverged { .. }) => 3,
            CliError::Core(_) => 2,
        }
    }
}
