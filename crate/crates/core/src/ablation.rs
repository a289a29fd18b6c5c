//! Runs every method variant, plus fixed-decay AKD, under one shared config.

use std::fmt::Write as _;
use std::thread;

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Result;
use crate::losses::DecayMode;
use crate::metrics::MetricsReport;
use crate::trainer::{Experiment, MethodVariant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LadderEntry {
    pub method: MethodVariant,
    pub decay_mode: DecayMode,
}

impl LadderEntry {
    pub fn label(&self) -> String {
        match self.decay_mode {
            DecayMode::Adaptive => self.method.name().to_string(),
            DecayMode::Fixed => format!("{}_fixed_decay", self.method.name()),
        }
    }
}

/// The seven variants with adaptive decay, then AKD with a fixed exponent.
pub fn ladder_entries() -> Vec<LadderEntry> {
    MethodVariant::ALL
        .into_iter()
        .map(|method| LadderEntry {
            method,
            decay_mode: DecayMode::Adaptive,
        })
        .chain(std::iter::once(LadderEntry {
            method: MethodVariant::Akd,
            decay_mode: DecayMode::Fixed,
        }))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderRow {
    pub label: String,
    pub entry: LadderEntry,
    pub seeds: Vec<u64>,
    pub reports: Vec<MetricsReport>,
    pub final_map: f64,
    pub final_cf1: f64,
    pub final_of1: f64,
    pub final_fpr: f64,
    pub avg_map: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

impl LadderRow {
    fn from_reports(entry: LadderEntry, seeds: Vec<u64>, reports: Vec<MetricsReport>) -> Self {
        LadderRow {
            label: entry.label(),
            entry,
            final_map: mean(reports.iter().map(|r| r.last.map)),
            final_cf1: mean(reports.iter().map(|r| r.last.cf1)),
            final_of1: mean(reports.iter().map(|r| r.last.of1)),
            final_fpr: mean(reports.iter().map(|r| r.last.fpr)),
            avg_map: mean(reports.iter().map(|r| r.avg_map)),
            seeds,
            reports,
        }
    }
}

/// Config for one ladder entry at one seed.
pub fn entry_config(base: &RunConfig, entry: LadderEntry, seed: u64) -> RunConfig {
    let mut config = base.clone();
    config.method = entry.method;
    config.loss.decay_mode = entry.decay_mode;
    config.seed = seed;
    config
}

fn run_entry(base: &RunConfig, entry: LadderEntry, seeds: &[u64]) -> Result<LadderRow> {
    let reports = seeds
        .iter()
        .map(|&seed| Ok(Experiment::from_config(entry_config(base, entry, seed))?.run()?.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(LadderRow::from_reports(entry, seeds.to_vec(), reports))
}

/// Runs `entries` over `seeds`, one thread per entry.
pub fn run_ladder(base: &RunConfig, entries: &[LadderEntry], seeds: &[u64]) -> Result<Vec<LadderRow>> {
    thread::scope(|scope| {
        let handles: Vec<_> = entries
            .iter()
            .map(|&entry| scope.spawn(move || run_entry(base, entry, seeds)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("ladder worker panicked"))
            .collect()
    })
}

/// Every variant plus fixed-decay AKD.
pub fn ablation_ladder(base: &RunConfig, seeds: &[u64]) -> Result<Vec<LadderRow>> {
    run_ladder(base, &ladder_entries(), seeds)
}

/// Comparison table; metric columns are seed means in percent.
pub fn ladder_csv(rows: &[LadderRow]) -> String {
    let mut out = String::from("method,seeds,final_mAP,final_CF1,final_OF1,final_FPR,avg_mAP\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.4}",
            r.label,
            r.seeds.len(),
            100.0 * r.final_map,
            100.0 * r.final_cf1,
            100.0 * r.final_of1,
            100.0 * r.final_fpr,
            100.0 * r.avg_map
        );
    }
    out
}
