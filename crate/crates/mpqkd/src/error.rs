use thiserror::Error;

/// Errors surfaced by the command-line front end.
#[derive(Debug, Error)]
pub enum CliError {
    /// Missing, unreadable or invalid configuration (exit code 2).
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] mpqkd_core::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}
