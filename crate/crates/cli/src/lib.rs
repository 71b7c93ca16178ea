//! Operator commands for the immerflow gateway: serving, demo fixtures and
//! headless scenario runs.

pub mod demos;
pub mod error;
pub mod harness;

pub use error::CliError;
pub use harness::{run_scenario, DeviceReport, PlacedSummary, RunConfig, RunReport};
