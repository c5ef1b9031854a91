//! Structured run report.

use serde::{Deserialize, Serialize};

use crate::config::{ScenarioConfig, CONFIG_VERSION};

/// One pass/fail decision with the number that decided it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    /// Human-readable acceptance condition, e.g. `"< 1e-8"`.
    pub tolerance: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, passed: bool, measured: f64, tolerance: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            measured,
            tolerance: tolerance.into(),
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// `lo <= measured <= hi`.
    pub fn in_range(name: impl Into<String>, measured: f64, lo: f64, hi: f64) -> Self {
        Self::new(
            name,
            measured >= lo && measured <= hi,
            measured,
            format!("in [{lo}, {hi}]"),
        )
    }

    /// `measured < bound`.
    pub fn below(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(name, measured < bound, measured, format!("< {bound:e}"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub config: ScenarioConfig,
    pub config_version: u32,
    pub code_version: String,
    pub checks: Vec<CheckResult>,
    /// Paths of the CSV artifacts, relative to the output directory.
    pub artifacts: Vec<String>,
    /// Scenario-specific measurements.
    pub data: serde_json::Value,
    pub elapsed_seconds: f64,
}

impl RunReport {
    pub fn new(config: &ScenarioConfig) -> Self {
        Self {
            scenario: config.scenario.name().to_string(),
            config: config.clone(),
            config_version: CONFIG_VERSION,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            checks: Vec::new(),
            artifacts: Vec::new(),
            data: serde_json::Value::Null,
            elapsed_seconds: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
