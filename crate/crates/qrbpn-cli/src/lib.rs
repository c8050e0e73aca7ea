//! Command-line driver for the single-qubit characterization pipeline:
//! sweep simulation, effective-field fitting, fleet reporting, and
//! file-based job exchange with real hardware.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use error::{CliError, Result};
