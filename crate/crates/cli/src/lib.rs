//! Experiment driver: configs, run directories and evaluation tables.

pub mod commands;
pub mod config;
pub mod error;

pub use config::{ExperimentConfig, RawConfig};
pub use error::CliError;
