//! Exit-code classification: 2 for usage and input errors, 3 for failures of
//! a run that was given valid input.

use std::fmt::Display;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CliResult<T> = Result<T, Failure>;

pub fn input(e: impl Display) -> Failure {
    Failure { code: EXIT_INPUT, error: anyhow::anyhow!("{e}") }
}

pub fn runtime(e: impl Display) -> Failure {
    Failure { code: EXIT_RUNTIME, error: anyhow::anyhow!("{e}") }
}

/// I/O during a run is a runtime failure; every other library error is
/// classified by the library.
impl From<quadfuse::Error> for Failure {
    fn from(e: quadfuse::Error) -> Self {
        let code = match &e {
            quadfuse::Error::Io(_) => EXIT_RUNTIME,
            e if e.is_input_error() => EXIT_INPUT,
            _ => EXIT_RUNTIME,
        };
        Failure { code, error: e.into() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        runtime(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        runtime(e)
    }
}
