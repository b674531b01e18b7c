//! Command-line front end for the entlab numerical lab.

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

pub use commands::{run, RunError, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, EXIT_VIOLATION};
pub use config::{ConfigError, RunConfig};

/// R grid used by `c-curve` when none is given.
pub const DEFAULT_C_GRID: &str = "0:5:50";
