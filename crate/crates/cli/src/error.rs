use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_OUTPUT: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config, bad input file, or model parameters rejected on construction.
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("solver failed: {0}")]
    Solver(#[source] nonmarkov::Error),

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{failed} acceptance criteria failed")]
    VerifyFailed { failed: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Solver(_) => EXIT_SOLVER,
            CliError::Output { .. } => EXIT_OUTPUT,
            CliError::VerifyFailed { .. } => EXIT_VERIFY_FAILED,
        }
    }

    pub fn validation(e: impl std::fmt::Display) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Errors raised while building a scenario are configuration problems.
pub(crate) fn invalid(e: nonmarkov::Error) -> CliError {
    CliError::Validation(e.to_string())
}
