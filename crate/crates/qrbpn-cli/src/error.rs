//! Command errors mapped onto stable exit codes.
//!
//! 0 success, 1 partial per-qubit failures, 2 configuration or I/O,
//! 3 file schema, 4 data integrity.

use std::fmt;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config values, noise parameters, or unusable paths.
    Config(String),
    /// A file that does not match the expected schema or version.
    Schema(String),
    /// Structurally valid files whose contents disagree (missing job ids,
    /// count mismatches).
    Integrity(String),
    /// The command completed but some qubits failed; artifacts were written.
    Partial(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Partial(_) => 1,
            CliError::Config(_) => 2,
            CliError::Schema(_) => 3,
            CliError::Integrity(_) => 4,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn schema(msg: impl Into<String>) -> Self {
        CliError::Schema(msg.into())
    }

    pub fn integrity(msg: impl Into<String>) -> Self {
        CliError::Integrity(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Schema(m) => write!(f, "schema error: {m}"),
            CliError::Integrity(m) => write!(f, "data integrity error: {m}"),
            CliError::Partial(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<qrbpn_core::Error> for CliError {
    fn from(e: qrbpn_core::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
