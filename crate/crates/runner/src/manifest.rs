use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::Result;

/// A named pass/fail measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable admissible range, e.g. `[1.7, 2.3]` or `< 0.01`.
    pub bound: String,
    pub passed: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, max: f64) -> Self {
        Self { name: name.into(), value, bound: format!("< {max:e}"), passed: value < max }
    }

    pub fn at_most(name: impl Into<String>, value: f64, max: f64) -> Self {
        Self { name: name.into(), value, bound: format!("<= {max}"), passed: value <= max }
    }

    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self { name: name.into(), value, bound: format!("[{lo}, {hi}]"), passed: value >= lo && value <= hi }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value: if ok { 1.0 } else { 0.0 }, bound: "true".into(), passed: ok }
    }
}

/// Everything needed to re-run an experiment, plus what it produced.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub started_unix_s: u64,
    pub wall_clock_s: f64,
    /// `ok`, `gate_failed` or `error: <message>`.
    pub status: String,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub checks: Vec<Check>,
    pub summary: serde_json::Value,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            experiment: config.experiment.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            started_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            wall_clock_s: 0.0,
            status: "running".into(),
            outputs: Vec::new(),
            checks: Vec::new(),
            summary: serde_json::Value::Null,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}
