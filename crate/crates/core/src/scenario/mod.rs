//! Scenario files: loading, running, validating against expected device
//! transitions and timing.

mod driver;
mod format;
mod loader;

pub use driver::{
    bench, run_scenario, validate, BenchReport, Divergence, ExecutionTiming, RunSettings, ScenarioRun,
    ValidationReport,
};
pub use format::*;
pub use loader::{Scenario, ScenarioError, BUNDLED_POC, SCHEMA};
