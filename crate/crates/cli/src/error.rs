use std::fmt;

use noisebath::error::Error;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Stage { stage: &'static str, source: Error },
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Stage { source, .. } => match source {
                Error::Invariant(_) | Error::Stability { .. } | Error::DimensionOverflow { .. } => 3,
                Error::NonConvergence(_) => 4,
                _ => 2,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config: {msg}"),
            CliError::Stage { stage, source } => write!(f, "{stage}: {source}"),
            CliError::Io(e) => write!(f, "io: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Tags core errors with the pipeline stage they came from.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageExt<T> for noisebath::error::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}

pub type CliResult<T> = Result<T, CliError>;
