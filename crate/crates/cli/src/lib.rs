//! Library side of the `impedance` binary: config loading, output
//! formatting and the subcommand bodies.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;

pub use config::FileConfig;
pub use error::CliError;
