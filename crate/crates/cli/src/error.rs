//! Error categories and their process exit codes.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Invalid flags, config file or preset parameters.
    Config(String),
    /// The integrator or reference solver failed.
    Integration(String),
    /// Writing an output artifact failed.
    Output(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Integration(_) => 3,
            Self::Output(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Integration(m) => write!(f, "integration failed: {m}"),
            Self::Output(e) => write!(f, "output error: {e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        Self::Output(e)
    }
}

impl From<mrtrbdf2::benchmarks::BenchmarkError> for CliError {
    fn from(e: mrtrbdf2::benchmarks::BenchmarkError) -> Self {
        use mrtrbdf2::benchmarks::BenchmarkError as B;
        match e {
            B::InvalidParameter(_) | B::MissingSpatialMetadata(_) | B::TimeOutOfRange { .. } => Self::Config(e.to_string()),
            _ => Self::Integration(e.to_string()),
        }
    }
}

impl From<mrtrbdf2::multirate::MultirateError> for CliError {
    fn from(e: mrtrbdf2::multirate::MultirateError) -> Self {
        Self::Integration(e.to_string())
    }
}
