use thiserror::Error;

/// Exit status 2 for anything the user must fix in the invocation or the
/// scenario, 1 for failures while running it.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] preq_core::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Run(_) | CliError::Io { .. } => 1,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}
