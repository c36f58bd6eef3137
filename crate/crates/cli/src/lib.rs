//! File formats, sweeps and subcommands of the `salmix` tool.

pub mod commands;
pub mod error;
pub mod grid;
pub mod input;
pub mod report;
pub mod repro;
pub mod sweep;

pub use error::{CliError, Result};
