//! Command-line front end for path-independent flow matching experiments.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod parse;
pub mod scenario;

pub use config::RunConfig;
pub use scenario::{run_scenario, scenario_spec, Metrics, Overrides, ScenarioSpec, SCENARIOS};
