//! Error taxonomy shared by the library and the CLI.
//!
//! The categories map 1:1 onto the CLI exit codes: validation (2), I/O (3),
//! solver (4), statistics (5). Integration failures carry the path index and
//! time so a failed ensemble member can be replayed in isolation.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed model data, broken invariants, bad configuration.
    #[error("validation: {0}")]
    Validation(String),

    /// Filesystem / serialization problems.
    #[error("i/o: {0}")]
    Io(String),

    /// Spectral assembly or linear-algebra failure (aliasing, stagnation,
    /// degenerate kernel, residual above tolerance).
    #[error("solver: {0}")]
    Solver(String),

    /// Statistical procedure refused or failed (too few samples, no signal).
    #[error("statistics: {0}")]
    Statistics(String),

    /// A simulated path left the finite domain; carries replay coordinates.
    #[error("integration: path {path} diverged at t = {time}: {message}")]
    Integration {
        path: usize,
        time: f64,
        message: String,
    },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable process exit code for the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) => 2,
            Error::Io(_) => 3,
            Error::Solver(_) | Error::Integration { .. } => 4,
            Error::Statistics(_) => 5,
        }
    }
}
