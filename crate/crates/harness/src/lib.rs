//! Scenario runner that checks the local entropy inequalities on model
//! Ricci flows and writes a reproducible report bundle.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;
pub mod report;
pub mod runner;
pub mod scenarios;
pub mod tolerances;

pub use config::{ConfigError, ScenarioConfig, CHECK_NAMES};
pub use report::{Report, Verdict};
pub use runner::{run_scenario, RunError, RunOutcome};
