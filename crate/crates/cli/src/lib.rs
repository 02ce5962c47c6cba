//! Config-driven experiment runner for federated topic-model training.
//!
//! [`config::parse_config`] turns a JSON file into an [`ExperimentSpec`],
//! [`experiment::run_experiment`] executes its runs and writes CSV telemetry
//! plus checkpoints.

pub mod config;
pub mod experiment;
pub mod format;
pub mod inspect;

pub use config::{parse_config, ConfigError, ExperimentSpec, RunSpec, ScheduleChoice};
pub use experiment::{run_experiment, ExperimentError, ExperimentOutcome, RunOutcome};

/// Overrides the configured output directory when set.
pub const OUTPUT_DIR_ENV: &str = "FEDTOPIC_OUTPUT_DIR";
