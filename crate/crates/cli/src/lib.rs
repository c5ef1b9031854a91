//! Configuration-driven scenario runner for the vdwlab numerical
//! laboratory: TOML scenario configs in, CSV artifacts and a JSON report out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod report;
pub mod scenarios;

pub use config::{ConfigError, Scenario, ScenarioConfig};
pub use report::{CheckResult, RunReport};
pub use scenarios::{list_scenarios, run, CatalogEntry, RunError, RunOptions};
