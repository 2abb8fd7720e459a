//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad preset name, inconsistent parameters, parse failures).
    #[error("configuration error: {0}")]
    Config(String),

    /// Filesystem failure, always annotated with the offending path.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The simulated state left the finite domain; the episode is aborted.
    #[error("non-finite state at step {t_index}")]
    NonFiniteState { t_index: usize },

    /// A policy callback failed or produced a non-finite action.
    #[error("policy failed at step {t_index}: {message}")]
    Policy { t_index: usize, message: String },

    /// The replay buffer holds too few transitions for a TD(1) loss.
    #[error("insufficient replay: need at least {need} entries, have {have}")]
    InsufficientReplay { have: usize, need: usize },

    /// An aggregate was requested over an empty table.
    #[error("no data")]
    NoData,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
