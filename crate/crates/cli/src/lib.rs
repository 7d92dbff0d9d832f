//! Command-line front end for `chainset`.

pub mod bundle;
pub mod commands;
pub mod plot;
pub mod spec;

use chainset::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("not plottable: {0}")]
    NotPlottable(String),
    #[error("empty result: {0}")]
    Empty(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    /// 0 success, 2 parse/validation, 3 numerical failure, 4 unreachable or
    /// empty result.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Io(_) | CliError::NotPlottable(_) => 2,
            CliError::Empty(_) => 4,
            CliError::Core(e) => match e {
                Error::Unreachable => 4,
                Error::InvalidSystem(_)
                | Error::InvalidControl(_)
                | Error::DimensionMismatch { .. }
                | Error::InvalidGrid(_)
                | Error::GridTooLarge(_)
                | Error::EpsilonTooSmall { .. } => 2,
                _ => 3,
            },
        }
    }
}
