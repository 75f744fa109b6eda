//! Scenario-driven front end for `preq-core`: a JSON scenario names a
//! generator, an initial covariance and a time grid, and each command turns
//! it into CSV/JSON artifacts plus a `report.json`.

pub mod commands;
pub mod config;
pub mod error;
pub mod paths;
pub mod report;
pub mod verify;

pub use commands::{run, Command, RunOptions};
pub use config::{OutputFormat, Scenario, ScenarioConfig};
pub use error::CliError;
pub use report::{CheckResult, RunReport};
