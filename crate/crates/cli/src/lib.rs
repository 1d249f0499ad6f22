//! Experiment runner for `gsf-core`: configuration files, CSV/JSON
//! artifacts with checksummed manifests, and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{ExperimentConfig, Overrides};
pub use error::{CliError, ConfigError};
