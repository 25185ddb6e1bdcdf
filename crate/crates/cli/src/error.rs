use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const USAGE: u8 = 1;
    pub const IO: u8 = 2;
    /// Unseen context or undefined perplexity.
    pub const DATA: u8 = 3;
    pub const EARLY_TERMINATION: u8 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{0}")]
    Data(String),

    #[error(transparent)]
    Model(#[from] markovlm::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_owned(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        use markovlm::Error as E;
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io { .. } => exit::IO,
            CliError::Data(_) => exit::DATA,
            CliError::Model(e) => match e {
                E::Domain(_) => exit::USAGE,
                E::Decode(_) | E::Format { .. } => exit::IO,
                E::MissingContext { .. } | E::InsufficientData { .. } => exit::DATA,
            },
        }
    }
}

/// Writes to standard output failing (e.g. a closed pipe).
impl From<io::Error> for CliError {
    fn from(source: io::Error) -> Self {
        CliError::io(Path::new("<stdout>"), source)
    }
}
