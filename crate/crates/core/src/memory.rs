//! Replay memory with per-class reservoirs and online relabeling.
//!
//! Every class has its own reservoir of sample ids. A sample that is positive
//! for several classes of its task is offered to each of their reservoirs but
//! stored only once; it is dropped from the store when no reservoir refers to
//! it anymore.
//!
//! At each task boundary `relabel` fills the missing blocks of the stored label
//! matrix: samples from earlier tasks get the new classes from the freshly
//! trained model, samples from the just-finished task get all older classes
//! from the previous snapshot. Annotations present at insertion are never
//! touched.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::data::{Label, TaskSchedule, TriStateLabels};
use crate::error::{Error, Result};
use crate::numeric::Predictor;

#[derive(Debug, Clone, PartialEq)]
pub struct MemorySample {
    pub features: Vec<f64>,
    pub labels: TriStateLabels,
    /// Task (0-based) whose training stream the sample came from.
    pub source_task: usize,
    /// Insertion sequence number, unique within a buffer.
    pub seq: u64,
}

#[derive(Debug, Clone, Default)]
struct Reservoir {
    slots: Vec<u64>,
    seen: u64,
}

#[derive(Debug, Clone)]
pub struct MemoryBuffer {
    per_class: usize,
    reservoirs: Vec<Reservoir>,
    store: BTreeMap<u64, MemorySample>,
    refcount: BTreeMap<u64, usize>,
    next_seq: u64,
}

/// Summary of one relabel pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RelabelStats {
    pub filled_by_current: usize,
    pub filled_by_past: usize,
    pub positives_assigned: usize,
}

impl MemoryBuffer {
    pub fn new(class_count: usize, per_class: usize) -> Self {
        MemoryBuffer {
            per_class,
            reservoirs: vec![Reservoir::default(); class_count],
            store: BTreeMap::new(),
            refcount: BTreeMap::new(),
            next_seq: 0,
        }
    }

    pub fn per_class(&self) -> usize {
        self.per_class
    }

    /// Number of distinct stored samples.
    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    pub fn class_len(&self, class: usize) -> usize {
        self.reservoirs[class].slots.len()
    }

    /// How many stream items have been offered to `class`'s reservoir.
    pub fn class_seen(&self, class: usize) -> u64 {
        self.reservoirs[class].seen
    }

    /// Sequence numbers held in `class`'s reservoir.
    pub fn class_slots(&self, class: usize) -> &[u64] {
        &self.reservoirs[class].slots
    }

    pub fn samples(&self) -> impl Iterator<Item = &MemorySample> {
        self.store.values()
    }

    /// Offers a sample to the reservoir of every class in `task_classes` for
    /// which it is annotated positive. Returns the number of reservoirs that
    /// took it.
    pub fn reservoir_update<R: Rng + ?Sized>(
        &mut self,
        features: &[f64],
        labels: &TriStateLabels,
        source_task: usize,
        task_classes: &[usize],
        rng: &mut R,
    ) -> usize {
        let seq = self.next_seq;
        self.next_seq += 1;
        let mut taken = 0;
        for &class in task_classes {
            if labels.get(class) != Label::Positive {
                continue;
            }
            let cap = self.per_class;
            let res = &mut self.reservoirs[class];
            res.seen += 1;
            if cap == 0 {
                continue;
            }
            if res.slots.len() < cap {
                res.slots.push(seq);
            } else {
                let j = rng.random_range(0..res.seen);
                if j >= cap as u64 {
                    continue;
                }
                let evicted = std::mem::replace(&mut res.slots[j as usize], seq);
                Self::release(&mut self.store, &mut self.refcount, evicted);
            }
            *self.refcount.entry(seq).or_insert(0) += 1;
            taken += 1;
        }
        if taken > 0 {
            self.store.insert(
                seq,
                MemorySample {
                    features: features.to_vec(),
                    labels: labels.clone(),
                    source_task,
                    seq,
                },
            );
        }
        taken
    }

    fn release(store: &mut BTreeMap<u64, MemorySample>, refcount: &mut BTreeMap<u64, usize>, seq: u64) {
        if let Some(n) = refcount.get_mut(&seq) {
            *n -= 1;
            if *n == 0 {
                refcount.remove(&seq);
                store.remove(&seq);
            }
        }
    }

    /// Fills missing labels after training task `task` (0-based).
    ///
    /// `past` is the snapshot from before this task (absent for the first
    /// task); `current` is the model just trained. A class is set positive iff
    /// the relabeling model's probability is strictly above `threshold`.
    pub fn relabel(
        &mut self,
        past: Option<&dyn Predictor>,
        current: &dyn Predictor,
        task: usize,
        schedule: &TaskSchedule,
        threshold: f64,
    ) -> Result<RelabelStats> {
        let mut stats = RelabelStats::default();
        if task == 0 {
            return Ok(stats);
        }
        let new_classes = schedule.task_classes(task);
        let old_classes = schedule.classes_before(task);
        let needs_past = self.store.values().any(|s| s.source_task == task);
        if needs_past && past.is_none() {
            return Err(Error::Protocol(format!(
                "relabeling task {} samples needs the previous model snapshot",
                task + 1
            )));
        }
        for sample in self.store.values_mut() {
            let (model, classes, counter) = if sample.source_task < task {
                (current, new_classes, &mut stats.filled_by_current)
            } else if sample.source_task == task {
                (past.expect("checked above"), old_classes.as_slice(), &mut stats.filled_by_past)
            } else {
                return Err(Error::Protocol(format!(
                    "memory holds a sample from task {} while relabeling task {}",
                    sample.source_task + 1,
                    task + 1
                )));
            };
            if classes.iter().all(|&c| !sample.labels.get(c).is_missing()) {
                continue;
            }
            let probs = model.predict(&sample.features)?;
            for &c in classes {
                let positive = probs[c] > threshold;
                if sample.labels.fill(c, positive) {
                    *counter += 1;
                    stats.positives_assigned += positive as usize;
                }
            }
        }
        Ok(stats)
    }

    /// Uniform draws with replacement over the distinct stored samples.
    /// `None` when the buffer is empty.
    pub fn sample_replay<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Option<Vec<&MemorySample>> {
        if self.store.is_empty() {
            return None;
        }
        let all: Vec<&MemorySample> = self.store.values().collect();
        Some(
            (0..batch_size)
                .map(|_| all[rng.random_range(0..all.len())])
                .collect(),
        )
    }

    /// Whether every stored sample is annotated over `classes`.
    pub fn fully_annotated_over(&self, classes: &[usize]) -> bool {
        self.store.values().all(|s| s.labels.is_annotated_over(classes))
    }

    /// CSV audit dump: features, labels (`?` for missing), source task, seq.
    pub fn to_csv_string(&self, class_names: &[String]) -> String {
        let mut out = String::new();
        let dim = self.store.values().next().map_or(0, |s| s.features.len());
        let mut header: Vec<String> = (0..dim).map(|i| format!("f{i}")).collect();
        header.extend(class_names.iter().map(|n| format!("class:{n}")));
        header.push("source_task".into());
        header.push("seq".into());
        out.push_str(&header.join(","));
        out.push('\n');
        for s in self.store.values() {
            for v in &s.features {
                let _ = write!(out, "{v:?},");
            }
            for l in s.labels.entries() {
                let _ = write!(out, "{l},");
            }
            let _ = writeln!(out, "{},{}", s.source_task + 1, s.seq);
        }
        out
    }

    pub fn write_csv(&self, path: &Path, class_names: &[String]) -> Result<()> {
        std::fs::write(path, self.to_csv_string(class_names)).map_err(|e| Error::io(path, e))
    }
}
