use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use dyngame::diag::{MonitorReport, Verdict};
use dyngame::gain::SmallGainReport;
use dyngame::game::NashPoint;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub const TOOL: &str = "dyngame";

/// JSON report of one command. Field order is the key order on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nash: Option<NashPoint<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub small_gain: Vec<SmallGainReport>,
    /// Some applicable family passed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditions_pass: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_points: Option<Vec<NashPoint<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monitor: Option<MonitorSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_csv: Option<String>,
}

impl RunReport {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config.hash(),
            config: config.clone(),
            nash: None,
            small_gain: Vec::new(),
            conditions_pass: None,
            fixed_points: None,
            verdict: None,
            monitor: None,
            trajectory_csv: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}

/// Monitor parameters and outcome without the per-node breaches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSummary {
    pub sigma: f64,
    pub mu: f64,
    #[serde(rename = "Theta")]
    pub theta_bound: f64,
    pub checked_nodes: usize,
    pub max_violation: f64,
    pub violation_count: usize,
}

impl From<&MonitorReport> for MonitorSummary {
    fn from(r: &MonitorReport) -> Self {
        Self {
            sigma: r.sigma,
            mu: r.mu,
            theta_bound: r.theta_bound,
            checked_nodes: r.checked_nodes,
            max_violation: r.max_violation,
            violation_count: r.violations.len(),
        }
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
