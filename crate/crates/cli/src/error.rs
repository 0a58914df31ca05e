use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("all trajectories diverged at t = {at}; partial outputs were written and marked incomplete")]
    Diverged { at: f64 },

    #[error("oracle truncation failure: {0}")]
    Truncation(String),

    #[error("malformed output file: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Core(ppcat_core::Error),
}

impl CliError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Diverged { .. } => 3,
            CliError::Truncation(_) => 4,
            _ => 1,
        }
    }
}

impl From<ppcat_core::Error> for CliError {
    fn from(e: ppcat_core::Error) -> Self {
        match e {
            ppcat_core::Error::Truncation { .. } | ppcat_core::Error::DimensionTooLarge { .. } => {
                CliError::Truncation(e.to_string())
            }
            ppcat_core::Error::InvalidParameter { .. } => CliError::Config(e.to_string()),
            other => CliError::Core(other),
        }
    }
}
