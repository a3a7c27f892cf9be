//! Experiment runner behind the `hkuramoto` binary.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{run, Command};
pub use config::{FileConfig, RunConfig};
pub use error::CliError;
