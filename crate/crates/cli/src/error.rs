//! Error-to-exit-code mapping.
//!
//! - 1: runtime failure (IO, parsing, threshold breach is signalled
//!   separately through the exit code of the command itself)
//! - 2: usage errors (clap)
//! - 3: model assumption violations (A1, A2, Omega, M)
//! - 4: iteration budget exhausted

use meta_equiv_core::{MatrixError, ModelError, SolveError};

pub const EXIT_FAIL: u8 = 1;
pub const EXIT_ASSUMPTION: u8 = 3;
pub const EXIT_MAX_ITER: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Runtime(String),
    Assumption(String),
    MaxIterations(String),
}

impl CliError {
    pub fn runtime(msg: impl Into<String>) -> CliError {
        CliError::Runtime(msg.into())
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => EXIT_FAIL,
            CliError::Assumption(_) => EXIT_ASSUMPTION,
            CliError::MaxIterations(_) => EXIT_MAX_ITER,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Runtime(m) | CliError::Assumption(m) | CliError::MaxIterations(m) => m,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> CliError {
        match e {
            ModelError::AssumptionA1Violated { .. }
            | ModelError::AssumptionA2Violated { .. }
            | ModelError::OmegaNotSpd { .. }
            | ModelError::MNotSpd { .. } => CliError::Assumption(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<MatrixError> for CliError {
    fn from(e: MatrixError) -> CliError {
        CliError::Runtime(e.to_string())
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> CliError {
        match e {
            SolveError::MaxIterationsExceeded { .. } => CliError::MaxIterations(e.to_string()),
            SolveError::Model(m) => m.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Runtime(e.to_string())
    }
}
