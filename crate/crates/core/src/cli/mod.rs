//! Batch front-end: configuration parsing, dispatch and reports.

pub mod config;
pub mod run;

pub use config::{parse_config, ConfigError, RunSpec};
pub use run::{run, RunError, RunOptions, RunOutcome};
