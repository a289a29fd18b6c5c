//! Multi-label evaluation: per-class AP / mAP, macro F1 (CF1), micro F1 (OF1)
//! and pooled false-positive rate, plus class-incremental aggregation.
//!
//! Conventions:
//! - AP is non-interpolated: the mean of precision at the rank of each relevant
//!   item, ranking by descending score with ties broken by original index.
//! - Classes without test positives are left out of mAP but still count for
//!   F1 and FPR.
//! - F1 is 0 when precision + recall is 0.
//! - FPR pools FP and TN across all evaluated classes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numeric::Predictor;

pub const DEFAULT_DECISION_THRESHOLD: f64 = 0.5;

/// `None` when there are no relevant items.
pub fn average_precision(scores: &[f64], relevance: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), relevance.len(), "scores and relevance differ in length");
    let relevant = relevance.iter().filter(|&&r| r).count();
    if relevant == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if relevance[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Some(sum / relevant as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn f1(&self) -> f64 {
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }

    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Counts for one class; a score strictly above `threshold` predicts positive.
pub fn confusion(scores: &[f64], relevance: &[bool], threshold: f64) -> Confusion {
    let mut conf = Confusion::default();
    for (s, &r) in scores.iter().zip(relevance) {
        conf.add(*s > threshold, r);
    }
    conf
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    /// 1-based task number.
    pub task: usize,
    pub label_space: usize,
    pub map: f64,
    pub cf1: f64,
    pub of1: f64,
    pub fpr: f64,
}

/// Metrics from predicted probabilities.
///
/// `probs[i][c]` and `labels[i][c]` are indexed by absolute class; only the
/// classes in `label_space` are scored.
pub fn evaluate_predictions(
    task: usize,
    probs: &[Vec<f64>],
    labels: &[&[u8]],
    label_space: &[usize],
    threshold: f64,
) -> Result<MetricsRow> {
    if probs.is_empty() {
        return Err(Error::Evaluation("empty test set".into()));
    }
    if probs.len() != labels.len() {
        return Err(Error::Evaluation(format!(
            "{} prediction rows for {} label rows",
            probs.len(),
            labels.len()
        )));
    }
    if label_space.is_empty() {
        return Err(Error::Evaluation("empty label space".into()));
    }
    let mut ap_sum = 0.0;
    let mut ap_count = 0usize;
    let mut f1_sum = 0.0;
    let mut pooled = Confusion::default();
    for &c in label_space {
        let scores: Vec<f64> = probs.iter().map(|p| p[c]).collect();
        let relevance: Vec<bool> = labels.iter().map(|l| l[c] == 1).collect();
        if let Some(ap) = average_precision(&scores, &relevance) {
            ap_sum += ap;
            ap_count += 1;
        }
        let conf = confusion(&scores, &relevance, threshold);
        f1_sum += conf.f1();
        pooled.tp += conf.tp;
        pooled.fp += conf.fp;
        pooled.fn_ += conf.fn_;
        pooled.tn += conf.tn;
    }
    if ap_count == 0 {
        return Err(Error::Evaluation(
            "no class in the label space has a positive test sample".into(),
        ));
    }
    Ok(MetricsRow {
        task,
        label_space: label_space.len(),
        map: ap_sum / ap_count as f64,
        cf1: f1_sum / label_space.len() as f64,
        of1: pooled.f1(),
        fpr: pooled.fpr(),
    })
}

/// Scores `model` on the given test rows over `label_space`.
pub fn evaluate(
    task: usize,
    model: &dyn Predictor,
    test: &Dataset,
    rows: &[usize],
    label_space: &[usize],
    threshold: f64,
) -> Result<MetricsRow> {
    let probs = rows
        .iter()
        .map(|&r| model.predict(test.features(r)))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<&[u8]> = rows.iter().map(|&r| test.labels(r)).collect();
    evaluate_predictions(task, &probs, &labels, label_space, threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastAcc {
    pub map: f64,
    pub cf1: f64,
    pub of1: f64,
    pub fpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
    pub last: LastAcc,
    /// Mean of the per-task mAP values.
    pub avg_map: f64,
}

pub fn aggregate(rows: Vec<MetricsRow>) -> Result<MetricsReport> {
    let final_row = rows
        .last()
        .ok_or_else(|| Error::Evaluation("no metric rows to aggregate".into()))?;
    let last = LastAcc {
        map: final_row.map,
        cf1: final_row.cf1,
        of1: final_row.of1,
        fpr: final_row.fpr,
    };
    let avg_map = rows.iter().map(|r| r.map).sum::<f64>() / rows.len() as f64;
    Ok(MetricsReport { rows, last, avg_map })
}

impl MetricsReport {
    /// `task,mAP,CF1,OF1,FPR`, values in percent.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("task,mAP,CF1,OF1,FPR\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.4},{:.4},{:.4},{:.4}",
                r.task,
                100.0 * r.map,
                100.0 * r.cf1,
                100.0 * r.of1,
                100.0 * r.fpr
            );
        }
        out
    }
}
