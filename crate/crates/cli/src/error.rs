use thiserror::Error;

/// Exit codes: 1 config, 2 numeric or synthesis failure, 3 simulation
/// contract violation.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("output error: {0}")]
    Output(String),
    #[error("synthesis failed: {0}")]
    Numeric(sppc_core::Error),
    #[error("invariant checks failed: {}", .0.join(", "))]
    Checks(Vec<String>),
    #[error("simulation contract violated: {0}")]
    Contract(sppc_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output(_) => 1,
            CliError::Numeric(_) | CliError::Checks(_) => 2,
            CliError::Contract(_) => 3,
        }
    }

    /// Classifies an error raised while simulating.
    pub fn from_simulation(err: sppc_core::Error) -> Self {
        match err {
            sppc_core::Error::BufferExhausted { .. } => CliError::Contract(err),
            other => CliError::Numeric(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Output(err.to_string())
    }
}
