//! Reference checks shared by the focused test files and the acceptance run.
//! Each returns `Err` with a description of the first mismatch.

#![allow(dead_code)]

use mlcil_core::data::TriStateLabels;
use mlcil_core::losses::{
    akd_loss, bce_loss, cls_loss, decay_exponent, er_loss, kd_loss, LossHyperParams, LossValue,
};
use mlcil_core::metrics::{average_precision, confusion, evaluate_predictions};
use mlcil_core::{Experiment, MemoryBuffer, TrainState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check<T = ()> = std::result::Result<T, String>;

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// AP by explicit rank counting: the rank of item `i` is one plus the number
/// of items ordered before it (higher score, or equal score and lower index).
pub fn reference_ap(scores: &[f64], relevant: &[bool]) -> Option<f64> {
    let n = scores.len();
    let before = |j: usize, i: usize| scores[j] > scores[i] || (scores[j] == scores[i] && j < i);
    let positives: Vec<usize> = (0..n).filter(|&i| relevant[i]).collect();
    if positives.is_empty() {
        return None;
    }
    let mut total = 0.0;
    for &i in &positives {
        let rank = 1 + (0..n).filter(|&j| before(j, i)).count();
        let hits = 1 + positives.iter().filter(|&&j| before(j, i)).count();
        total += hits as f64 / rank as f64;
    }
    Some(total / positives.len() as f64)
}

#[derive(Default, Clone, Copy, Debug, PartialEq, Eq)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

fn f1(c: Counts) -> f64 {
    let p = if c.tp + c.fp == 0 { 0.0 } else { c.tp as f64 / (c.tp + c.fp) as f64 };
    let r = if c.tp + c.fn_ == 0 { 0.0 } else { c.tp as f64 / (c.tp + c.fn_) as f64 };
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn close(what: &str, got: f64, want: f64) -> Check {
    if (got - want).abs() <= 1e-12 {
        Ok(())
    } else {
        Err(format!("{what}: {got} vs reference {want}"))
    }
}

/// Compares `evaluate_predictions` with the brute-force reference on
/// `instances` random problems with N ≤ 10 rows and C ≤ 5 classes. Instances
/// whose label space has no positive must be rejected and do not count.
pub fn metric_oracle(instances: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    while checked < instances {
        let n = rng.random_range(1..=10);
        let c = rng.random_range(1..=5);
        // Coarse scores so that ties and exact-threshold values occur.
        let probs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..c).map(|_| rng.random_range(0..=8) as f64 / 8.0).collect())
            .collect();
        let labels: Vec<Vec<u8>> = (0..n)
            .map(|_| (0..c).map(|_| rng.random_bool(0.4) as u8).collect())
            .collect();
        let space: Vec<usize> = (0..c).filter(|_| rng.random_bool(0.8)).collect();
        if space.is_empty() {
            continue;
        }
        let label_refs: Vec<&[u8]> = labels.iter().map(|l| l.as_slice()).collect();
        let result = evaluate_predictions(1, &probs, &label_refs, &space, 0.5);

        let mut aps = Vec::new();
        let mut per_class = Vec::new();
        let mut pooled = Counts::default();
        for &k in &space {
            let scores: Vec<f64> = probs.iter().map(|p| p[k]).collect();
            let rel: Vec<bool> = labels.iter().map(|l| l[k] == 1).collect();
            if let Some(ap) = reference_ap(&scores, &rel) {
                close("AP", average_precision(&scores, &rel).unwrap_or(f64::NAN), ap)?;
                aps.push(ap);
            }
            let mut counts = Counts::default();
            for i in 0..n {
                match (scores[i] > 0.5, rel[i]) {
                    (true, true) => counts.tp += 1,
                    (true, false) => counts.fp += 1,
                    (false, true) => counts.fn_ += 1,
                    (false, false) => counts.tn += 1,
                }
            }
            let got = confusion(&scores, &rel, 0.5);
            let got = Counts { tp: got.tp, fp: got.fp, fn_: got.fn_, tn: got.tn };
            if got != counts {
                return Err(format!("class {k}: counts {got:?} vs reference {counts:?}"));
            }
            pooled.tp += counts.tp;
            pooled.fp += counts.fp;
            pooled.fn_ += counts.fn_;
            pooled.tn += counts.tn;
            per_class.push(counts);
        }
        if aps.is_empty() {
            if result.is_ok() {
                return Err("label space without positives was not rejected".into());
            }
            continue;
        }
        let row = result.map_err(|e| e.to_string())?;
        let map = aps.iter().sum::<f64>() / aps.len() as f64;
        let cf1 = per_class.iter().map(|&c| f1(c)).sum::<f64>() / per_class.len() as f64;
        let fpr = if pooled.fp + pooled.tn == 0 {
            0.0
        } else {
            pooled.fp as f64 / (pooled.fp + pooled.tn) as f64
        };
        close("mAP", row.map, map)?;
        close("CF1", row.cf1, cf1)?;
        close("OF1", row.of1, f1(pooled))?;
        close("FPR", row.fpr, fpr)?;
        if row.label_space != space.len() {
            return Err(format!("label space {} vs {}", row.label_space, space.len()));
        }
        checked += 1;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Loss reductions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub enum Reduction {
    ClsToBce,
    AkdToKd,
    ErToBce,
}

struct Case {
    preds: Vec<f64>,
    old: Vec<f64>,
    labels: TriStateLabels,
    classes: Vec<usize>,
}

fn case(rng: &mut ChaCha8Rng) -> Case {
    let c = rng.random_range(1..=10);
    let preds: Vec<f64> = (0..c).map(|_| rng.random_range(1e-6..1.0 - 1e-6)).collect();
    let old: Vec<f64> = (0..c).map(|_| rng.random::<f64>()).collect();
    let full: Vec<u8> = (0..c).map(|_| rng.random_bool(0.5) as u8).collect();
    let classes: Vec<usize> = (0..c).filter(|_| rng.random_bool(0.7)).collect();
    Case {
        labels: TriStateLabels::masked(&full, &classes),
        preds,
        old,
        classes,
    }
}

fn same_loss(a: &LossValue, b: &LossValue) -> Check {
    if a.classes != b.classes {
        return Err(format!("class sets {:?} vs {:?}", a.classes, b.classes));
    }
    close("value", a.value, b.value)?;
    for (x, y) in a.grad.iter().zip(&b.grad) {
        if (x - y).abs() > 1e-12 * y.abs().max(1.0) {
            return Err(format!("gradient {x} vs {y}"));
        }
    }
    Ok(())
}

/// Zero exponents reached the three ways the decay factor can vanish.
fn zero_gammas(rng: &mut ChaCha8Rng) -> Check<[f64; 3]> {
    let coef: f64 = rng.random_range(0.0..3.0);
    let count = rng.random_range(1..50);
    let params = LossHyperParams {
        alpha: 0.0,
        beta: 0.0,
        ..LossHyperParams::default()
    };
    let gammas = [
        decay_exponent(0.0, count),
        decay_exponent(coef, 1),
        params.gamma_positive(count),
    ]
    .map(|g| g.map_err(|e| e.to_string()));
    let mut out = [0.0; 3];
    for (slot, g) in out.iter_mut().zip(gammas) {
        *slot = g?;
        if *slot != 0.0 {
            return Err(format!("expected a zero exponent, got {slot}"));
        }
    }
    Ok(out)
}

pub fn reduction_identity(which: Reduction, draws: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let err = |e: mlcil_core::Error| e.to_string();
    for draw in 0..draws {
        let k = case(&mut rng);
        for g in zero_gammas(&mut rng)? {
            let (a, b) = match which {
                Reduction::ClsToBce => (
                    cls_loss(&k.preds, &k.labels, &k.classes, g).map_err(err)?,
                    bce_loss(&k.preds, &k.labels, &k.classes).map_err(err)?,
                ),
                Reduction::AkdToKd => (
                    akd_loss(&k.preds, &k.old, &k.classes, g).map_err(err)?,
                    kd_loss(&k.preds, &k.old, &k.classes).map_err(err)?,
                ),
                Reduction::ErToBce => (
                    er_loss(&k.preds, &k.labels, &k.classes, g).map_err(err)?,
                    bce_loss(&k.preds, &k.labels, &k.classes).map_err(err)?,
                ),
            };
            same_loss(&a, &b).map_err(|e| format!("{which:?}, draw {draw}: {e}"))?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Reservoir
// ---------------------------------------------------------------------------

/// How often each stream position ends up in a single-class reservoir of
/// `capacity` after `trials` independent passes over `stream` items.
pub fn inclusion_counts(stream: usize, capacity: usize, trials: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = TriStateLabels::from_full(&[1]);
    let mut counts = vec![0u64; stream];
    for _ in 0..trials {
        let mut buffer = MemoryBuffer::new(1, capacity);
        for i in 0..stream {
            buffer.reservoir_update(&[i as f64], &labels, 0, &[0], &mut rng);
        }
        assert_eq!(buffer.len(), capacity.min(stream));
        for s in buffer.samples() {
            counts[s.features[0] as usize] += 1;
        }
    }
    counts
}

/// Checks inclusion frequencies against capacity / stream within 3 sigma:
/// ten blocks of stream positions, five single positions spread over the
/// stream, and the count of single positions outside the band (at most
/// 1.5% where the Gaussian rate is 0.27%).
pub fn reservoir_inclusion(stream: usize, capacity: usize, trials: usize, seed: u64) -> Check<String> {
    let counts = inclusion_counts(stream, capacity, trials, seed);
    let p = capacity as f64 / stream as f64;
    let block = stream / 10;
    let mut worst: f64 = 0.0;
    for b in 0..10 {
        let hits: u64 = counts[b * block..(b + 1) * block].iter().sum();
        let n = (block * trials) as f64;
        let z = (hits as f64 / n - p) / (p * (1.0 - p) / n).sqrt();
        worst = worst.max(z.abs());
        if z.abs() > 3.0 {
            return Err(format!("block {b}: z = {z:.2}"));
        }
    }
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    for i in [0, 1, stream / 2, stream - 2, stream - 1] {
        let z = (counts[i] as f64 / trials as f64 - p) / sigma;
        worst = worst.max(z.abs());
        if z.abs() > 3.0 {
            return Err(format!("item {i}: z = {z:.2}"));
        }
    }
    let outside = counts
        .iter()
        .filter(|&&c| (c as f64 / trials as f64 - p).abs() > 3.0 * sigma)
        .count();
    if outside * 1000 > stream * 15 {
        return Err(format!("{outside} of {stream} items outside 3 sigma"));
    }
    Ok(format!("max |z| {worst:.2}, {outside}/{stream} items outside 3 sigma"))
}

// ---------------------------------------------------------------------------
// Relabeling
// ---------------------------------------------------------------------------

/// After the last task: every memory sample is annotated over all classes and
/// its source task's labels still equal the training set's ground truth.
pub fn or_coverage(exp: &Experiment, state: &TrainState) -> Check<usize> {
    let all: Vec<usize> = (0..exp.train.class_count()).collect();
    if state.memory.is_empty() {
        return Err("memory is empty".into());
    }
    for sample in state.memory.samples() {
        let missing: Vec<usize> = all.iter().copied().filter(|&c| sample.labels.get(c).target().is_none()).collect();
        if !missing.is_empty() {
            return Err(format!("sample {} missing classes {missing:?}", sample.seq));
        }
        let row = (0..exp.train.len())
            .find(|&r| exp.train.features(r) == sample.features.as_slice())
            .ok_or_else(|| format!("sample {} is not a training row", sample.seq))?;
        for &c in exp.schedule.task_classes(sample.source_task) {
            let truth = exp.train.labels(row)[c] as f64;
            if sample.labels.get(c).target() != Some(truth) {
                return Err(format!("sample {}: insertion label of class {c} changed", sample.seq));
            }
        }
    }
    Ok(state.memory.len())
}
