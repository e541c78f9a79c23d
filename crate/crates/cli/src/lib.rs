//! Scenario catalog, configuration and run orchestration for the `bilstab` binary.

pub mod check;
pub mod config;
pub mod error;
pub mod run;
pub mod scenarios;

pub use config::ScenarioConfig;
pub use error::{CliError, CliResult};
pub use run::{run_scenario, simulate_scenario, sweep, RunManifest, ScenarioRun, SweepRow};
