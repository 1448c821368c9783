//! Command-line front end for the hyperuniformity diagnostics.

pub mod commands;
pub mod config;
pub mod output;

use hyperuni_core::Error;

pub use config::{Command, Format, RunConfig};

/// Version tag written into every report.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    /// 2 for configuration and input errors, 4 for malformed point files.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Core(Error::Parse { .. } | Error::DimensionMismatch { .. } | Error::NonUnitNorm { .. }) => 4,
            _ => 2,
        }
    }
}

/// What a successful command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub written: Vec<std::path::PathBuf>,
    /// Set when an optimizer run stopped before converging; outputs are
    /// still written and carry the flag.
    pub unconverged: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        if self.unconverged {
            3
        } else {
            0
        }
    }
}

pub fn run(config: RunConfig) -> Result<Outcome, CliError> {
    match config.command {
        Command::Generate => commands::generate(&config),
        Command::Analyze => commands::analyze(&config),
        Command::Classify => commands::classify(&config),
    }
}
