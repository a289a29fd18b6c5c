//! Run artifacts: `metrics.csv`, `report.json`, `ladder.csv`, `buffer_dump.csv`.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::ablation::{ladder_csv, LadderRow};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;

#[derive(Debug, Clone, Serialize)]
pub struct RunReport<'a> {
    pub config: &'a RunConfig,
    pub seed: u64,
    pub scenario: String,
    pub method: String,
    pub metrics: &'a MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

impl<'a> RunReport<'a> {
    pub fn new(config: &'a RunConfig, metrics: &'a MetricsReport, with_timestamp: bool) -> Self {
        RunReport {
            config,
            seed: config.seed,
            scenario: config.schedule.scenario.to_string(),
            method: config.method.name().to_string(),
            metrics,
            timestamp: with_timestamp.then(now_unix),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderReport<'a> {
    pub config: &'a RunConfig,
    pub seeds: &'a [u64],
    pub rows: &'a [LadderRow],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

pub fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `metrics.csv` and `report.json` into `dir`.
pub fn write_run(dir: &Path, config: &RunConfig, metrics: &MetricsReport, with_timestamp: bool) -> Result<()> {
    ensure_dir(dir)?;
    write_text(&dir.join("metrics.csv"), &metrics.to_csv_string())?;
    let report = RunReport::new(config, metrics, with_timestamp);
    let json = serde_json::to_string_pretty(&report)?;
    write_text(&dir.join("report.json"), &(json + "\n"))
}

/// Writes `ladder.csv` and `ladder.json` into `dir`.
pub fn write_ladder(dir: &Path, config: &RunConfig, seeds: &[u64], rows: &[LadderRow], with_timestamp: bool) -> Result<()> {
    ensure_dir(dir)?;
    write_text(&dir.join("ladder.csv"), &ladder_csv(rows))?;
    let report = LadderReport {
        config,
        seeds,
        rows,
        timestamp: with_timestamp.then(now_unix),
    };
    let json = serde_json::to_string_pretty(&report)?;
    write_text(&dir.join("ladder.json"), &(json + "\n"))
}
