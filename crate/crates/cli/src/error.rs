use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status: 2 for configuration problems, 3 for bad data or I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io(_) => 3,
        }
    }
}

/// Wraps a core error that came from input data rather than the config.
pub fn data(e: qoct_core::Error) -> CliError {
    match e {
        qoct_core::Error::Io(io) => CliError::Io(io),
        other => CliError::Data(other.to_string()),
    }
}
