//! Incremental training loop.
//!
//! For each task the model is trained on the task's partially labeled stream.
//! Depending on the [`MethodVariant`], a batch's loss combines
//!
//! - a classification term over the task's classes (BCE or the
//!   positive-down-weighted form),
//! - a distillation term over all earlier classes against the frozen
//!   previous model (KD or its asymmetric form),
//! - a replay term over all earlier classes on a batch drawn from memory.
//!
//! At the end of a task the model is frozen, the task stream is offered to the
//! memory reservoirs and, for relabeling variants, missing memory labels are
//! filled in.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, RunConfig, TaskData};
use crate::data::{load_dataset, synth_dataset, Dataset, Split, TaskSchedule, TriStateLabels};
use crate::error::{Error, Result};
use crate::losses::{
    akd_loss, bce_loss, bce_loss_annotated, cls_loss, er_loss, kd_loss, loss_weights, LossValue,
};
use crate::memory::{MemoryBuffer, RelabelStats};
use crate::metrics::{aggregate, evaluate, MetricsReport, MetricsRow};
use crate::numeric::{AdamConfig, ClassifierModel, Gradients, ModelSnapshot, OptimizerState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodVariant {
    /// BCE on the current task only.
    FineTuning,
    /// BCE + KD.
    Kd,
    /// Asymmetric classification loss, no distillation.
    AkdCls,
    /// Asymmetric classification + asymmetric distillation.
    Akd,
    /// AKD + replay of partially labeled memory with BCE on annotated classes.
    AkdReplay,
    /// AKD + relabeled memory replayed with BCE.
    AkdOrBce,
    /// AKD + relabeled memory replayed with the asymmetric replay loss.
    Rebll,
}

impl MethodVariant {
    pub const ALL: [MethodVariant; 7] = [
        MethodVariant::FineTuning,
        MethodVariant::Kd,
        MethodVariant::AkdCls,
        MethodVariant::Akd,
        MethodVariant::AkdReplay,
        MethodVariant::AkdOrBce,
        MethodVariant::Rebll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodVariant::FineTuning => "fine_tuning",
            MethodVariant::Kd => "kd",
            MethodVariant::AkdCls => "akd_cls",
            MethodVariant::Akd => "akd",
            MethodVariant::AkdReplay => "akd_replay",
            MethodVariant::AkdOrBce => "akd_or_bce",
            MethodVariant::Rebll => "rebll",
        }
    }

    pub fn asymmetric_cls(self) -> bool {
        !matches!(self, MethodVariant::FineTuning | MethodVariant::Kd)
    }

    pub fn distills(self) -> bool {
        !matches!(self, MethodVariant::FineTuning | MethodVariant::AkdCls)
    }

    pub fn asymmetric_distill(self) -> bool {
        self.distills() && self != MethodVariant::Kd
    }

    pub fn replays(self) -> bool {
        matches!(
            self,
            MethodVariant::AkdReplay | MethodVariant::AkdOrBce | MethodVariant::Rebll
        )
    }

    pub fn relabels(self) -> bool {
        matches!(self, MethodVariant::AkdOrBce | MethodVariant::Rebll)
    }
}

impl fmt::Display for MethodVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        MethodVariant::ALL
            .into_iter()
            .find(|m| m.name() == norm)
            .ok_or_else(|| {
                Error::config(
                    "method",
                    format!(
                        "unknown method `{s}`, expected one of {}",
                        MethodVariant::ALL.map(|m| m.name()).join(", ")
                    ),
                )
            })
    }
}

/// Loads or generates the `(train, test)` datasets named by the config.
pub fn load_data(config: &RunConfig) -> Result<(Dataset, Dataset)> {
    match config.data.source {
        DataSource::Synthetic => synth_dataset(&config.synth_spec()),
        DataSource::Csv => {
            let train = config
                .data
                .train
                .as_deref()
                .ok_or_else(|| Error::config("data.train", "missing"))?;
            let test = config
                .data
                .test
                .as_deref()
                .ok_or_else(|| Error::config("data.test", "missing"))?;
            let train = load_dataset(train, Split::Train)?;
            let test = load_dataset(test, Split::Test)?;
            if train.class_names() != test.class_names() {
                return Err(Error::Validation(
                    "train and test files have different class columns".into(),
                ));
            }
            if train.feature_dim() != test.feature_dim() {
                return Err(Error::Validation(
                    "train and test files have different feature columns".into(),
                ));
            }
            Ok((train, test))
        }
    }
}

/// Per-batch loss components (batch means, before weighting).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub cls: f64,
    pub distill: Option<f64>,
    pub replay: Option<f64>,
    pub total: f64,
}

/// Mutable state carried across tasks.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub model: ClassifierModel,
    pub optimizer: OptimizerState,
    /// Frozen model from the end of the previous task.
    pub snapshot: Option<ModelSnapshot>,
    pub memory: MemoryBuffer,
    /// Next task to train (0-based).
    pub next_task: usize,
    pub rows: Vec<MetricsRow>,
    pub relabel_log: Vec<RelabelStats>,
    shuffle_rng: ChaCha8Rng,
    memory_rng: ChaCha8Rng,
}

/// A configured experiment: schedule plus datasets.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: RunConfig,
    pub schedule: TaskSchedule,
    pub train: Dataset,
    pub test: Dataset,
}

impl Experiment {
    pub fn new(config: RunConfig, train: Dataset, test: Dataset) -> Result<Self> {
        config.validate()?;
        let schedule = TaskSchedule::build(config.schedule.scenario, train.class_names())?;
        Ok(Experiment {
            config,
            schedule,
            train,
            test,
        })
    }

    pub fn from_config(config: RunConfig) -> Result<Self> {
        let (train, test) = load_data(&config)?;
        Self::new(config, train, test)
    }

    pub fn init_state(&self) -> TrainState {
        let seed = self.config.seed;
        let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
        let model = ClassifierModel::init(
            self.train.feature_dim(),
            self.config.model.hidden,
            self.train.class_count(),
            self.config.model.activation,
            &mut init_rng,
        );
        let optimizer = OptimizerState::new(
            &model,
            AdamConfig {
                learning_rate: self.config.train.lr_base,
                weight_decay: self.config.train.weight_decay,
                ..AdamConfig::default()
            },
        );
        TrainState {
            model,
            optimizer,
            snapshot: None,
            memory: MemoryBuffer::new(self.train.class_count(), self.config.memory.per_class),
            next_task: 0,
            rows: Vec::new(),
            relabel_log: Vec::new(),
            shuffle_rng: ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5348_5546)),
            memory_rng: ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x4d45_4d4f)),
        }
    }

    /// Training rows of task `task` in stream order.
    pub fn task_rows(&self, task: usize) -> Vec<usize> {
        match self.config.data.task_data {
            TaskData::Positive => self.train.rows_with_positive_in(self.schedule.task_classes(task)),
            TaskData::All => (0..self.train.len()).collect(),
        }
    }

    /// Test rows evaluated after task `task`.
    pub fn test_rows(&self, task: usize) -> Vec<usize> {
        self.test
            .rows_with_positive_in(&self.schedule.classes_through(task))
    }

    fn gammas(&self, task: usize) -> Result<(f64, f64)> {
        let seen = self.schedule.classes_through(task).len();
        Ok((
            self.config.loss.gamma_positive(seen)?,
            self.config.loss.gamma_negative(seen)?,
        ))
    }

    /// Loss of one current-task sample and its gradient with respect to the
    /// output probabilities. Returns `(classification, distillation)` values
    /// and fills `out_grad` with the weighted gradient.
    pub fn current_sample_gradient(
        &self,
        state: &TrainState,
        task: usize,
        features: &[f64],
        probs: &[f64],
        labels: &TriStateLabels,
        out_grad: &mut [f64],
    ) -> Result<(f64, Option<f64>)> {
        let variant = self.config.method;
        let (gamma_pos, _) = self.gammas(task)?;
        let current = self.schedule.task_classes(task);
        let cls = if variant.asymmetric_cls() {
            cls_loss(probs, labels, current, gamma_pos)?
        } else {
            bce_loss(probs, labels, current)?
        };
        let distill: Option<LossValue> = match (&state.snapshot, variant.distills()) {
            (Some(snapshot), true) => {
                let old_classes = self.schedule.classes_before(task);
                let old = snapshot.forward(features)?;
                Some(if variant.asymmetric_distill() {
                    akd_loss(probs, &old, &old_classes, gamma_pos)?
                } else {
                    kd_loss(probs, &old, &old_classes)?
                })
            }
            _ => None,
        };
        let (w_cls, w_distill) = loss_weights(distill.is_some(), self.config.loss.lambda_akd);
        cls.scatter_into(out_grad, w_cls);
        if let Some(d) = &distill {
            d.scatter_into(out_grad, w_distill);
        }
        Ok((cls.value, distill.map(|d| d.value)))
    }

    /// Replay loss of one memory sample; gradient (unweighted) goes to `out_grad`.
    pub fn replay_sample_gradient(
        &self,
        task: usize,
        probs: &[f64],
        labels: &TriStateLabels,
        out_grad: &mut [f64],
    ) -> Result<f64> {
        let old_classes = self.schedule.classes_before(task);
        let loss = match self.config.method {
            MethodVariant::AkdReplay => bce_loss_annotated(probs, labels, &old_classes)?,
            MethodVariant::AkdOrBce => bce_loss(probs, labels, &old_classes).map_err(|e| match e {
                Error::Annotation { class } => Error::RelabelIncomplete { class },
                other => other,
            })?,
            MethodVariant::Rebll => {
                let (_, gamma_neg) = self.gammas(task)?;
                er_loss(probs, labels, &old_classes, gamma_neg)?
            }
            other => {
                return Err(Error::Protocol(format!("method {other} does not replay")));
            }
        };
        loss.scatter_into(out_grad, 1.0);
        Ok(loss.value)
    }

    /// Gradient of the full objective for one mini-batch.
    pub fn batch_gradient(
        &self,
        state: &mut TrainState,
        task: usize,
        batch: &[usize],
    ) -> Result<(LossBreakdown, Gradients)> {
        let c = self.train.class_count();
        let mut grads = Gradients::zeros_like(&state.model);
        let mut breakdown = LossBreakdown::default();
        let scale = 1.0 / batch.len() as f64;
        let mut distill_sum = None::<f64>;
        let current = self.schedule.task_classes(task);
        for &row in batch {
            let x = self.train.features(row);
            let labels = TriStateLabels::masked(self.train.labels(row), current);
            let trace = state.model.forward_trace(x)?;
            let mut out_grad = vec![0.0; c];
            let (cls, distill) =
                self.current_sample_gradient(state, task, x, &trace.probs, &labels, &mut out_grad)?;
            breakdown.cls += scale * cls;
            if let Some(d) = distill {
                *distill_sum.get_or_insert(0.0) += scale * d;
            }
            state
                .model
                .accumulate_backward(x, &trace, &out_grad, scale, &mut grads)?;
        }
        breakdown.distill = distill_sum;

        let lambda_er = self.config.loss.lambda_er;
        if self.config.method.replays() && task > 0 && lambda_er != 0.0 {
            let replay_size = self.config.replay_batch();
            let replay: Option<Vec<(Vec<f64>, TriStateLabels)>> = state
                .memory
                .sample_replay(replay_size, &mut state.memory_rng)
                .map(|batch| {
                    batch
                        .into_iter()
                        .map(|s| (s.features.clone(), s.labels.clone()))
                        .collect()
                });
            if let Some(replay) = replay {
                let rscale = lambda_er / replay.len() as f64;
                let mut total = 0.0;
                for (x, labels) in &replay {
                    let trace = state.model.forward_trace(x)?;
                    let mut out_grad = vec![0.0; c];
                    total += self.replay_sample_gradient(task, &trace.probs, labels, &mut out_grad)?;
                    state
                        .model
                        .accumulate_backward(x, &trace, &out_grad, rscale, &mut grads)?;
                }
                breakdown.replay = Some(total / replay.len() as f64);
            }
        }
        let (w_cls, w_distill) =
            loss_weights(breakdown.distill.is_some(), self.config.loss.lambda_akd);
        breakdown.total = w_cls * breakdown.cls
            + w_distill * breakdown.distill.unwrap_or(0.0)
            + lambda_er * breakdown.replay.unwrap_or(0.0);
        Ok((breakdown, grads))
    }

    /// Trains task `task`, then runs the boundary steps: snapshot, memory
    /// insertion and (for relabeling variants) relabeling. Returns the mean
    /// total loss of the last epoch.
    pub fn train_task(&self, state: &mut TrainState, task: usize) -> Result<f64> {
        if task != state.next_task {
            return Err(Error::Protocol(format!(
                "expected task {} next, got task {}",
                state.next_task + 1,
                task + 1
            )));
        }
        if task >= self.schedule.task_count() {
            return Err(Error::Protocol(format!(
                "task {} is beyond the {}-task schedule",
                task + 1,
                self.schedule.task_count()
            )));
        }
        let lr = if task == 0 {
            self.config.train.lr_base
        } else {
            self.config.train.lr_incremental
        };
        state.optimizer.set_learning_rate(lr);

        let stream = self.task_rows(task);
        let mut order = stream.clone();
        let mut last_epoch_loss = 0.0;
        for _ in 0..self.config.train.epochs {
            order.shuffle(&mut state.shuffle_rng);
            let mut epoch_loss = 0.0;
            let mut batches = 0usize;
            for batch in order.chunks(self.config.train.batch_size) {
                let (breakdown, grads) = self.batch_gradient(state, task, batch)?;
                state.optimizer.step(&mut state.model, &grads)?;
                epoch_loss += breakdown.total;
                batches += 1;
            }
            last_epoch_loss = epoch_loss / batches.max(1) as f64;
        }

        let frozen = state.model.snapshot(task);
        if self.config.method.replays() {
            let current = self.schedule.task_classes(task);
            for &row in &stream {
                let labels = TriStateLabels::masked(self.train.labels(row), current);
                state.memory.reservoir_update(
                    self.train.features(row),
                    &labels,
                    task,
                    current,
                    &mut state.memory_rng,
                );
            }
            if self.config.method.relabels() {
                let past = state.snapshot.as_ref().map(|s| s as &dyn crate::numeric::Predictor);
                let stats = state.memory.relabel(
                    past,
                    &state.model,
                    task,
                    &self.schedule,
                    self.config.memory.threshold,
                )?;
                state.relabel_log.push(stats);
            }
        }
        state.snapshot = Some(frozen);
        state.next_task += 1;
        Ok(last_epoch_loss)
    }

    pub fn evaluate_task(&self, state: &TrainState, task: usize) -> Result<MetricsRow> {
        evaluate(
            task + 1,
            &state.model,
            &self.test,
            &self.test_rows(task),
            &self.schedule.classes_through(task),
            self.config.eval.threshold,
        )
    }

    /// Trains and evaluates every task in order.
    pub fn run(&self) -> Result<(MetricsReport, TrainState)> {
        let mut state = self.init_state();
        for task in 0..self.schedule.task_count() {
            self.train_task(&mut state, task)?;
            let row = self.evaluate_task(&state, task)?;
            state.rows.push(row);
        }
        let report = aggregate(state.rows.clone())?;
        Ok((report, state))
    }
}

/// Builds data from the config and runs all tasks.
pub fn run_experiment(config: &RunConfig) -> Result<MetricsReport> {
    Ok(Experiment::from_config(config.clone())?.run()?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SynthSpec;

    fn small_config(method: MethodVariant) -> RunConfig {
        let mut c = RunConfig::default();
        c.method = method;
        c.data.synth = SynthSpec {
            classes: 6,
            feature_dim: 8,
            train_samples: 120,
            test_samples: 60,
            ..SynthSpec::default()
        };
        c.schedule.scenario = crate::data::Scenario::new(2, 2);
        c.model.hidden = 8;
        c.train.epochs = 2;
        c.train.batch_size = 16;
        c.memory.per_class = 3;
        c
    }

    #[test]
    fn method_names_round_trip() {
        for m in MethodVariant::ALL {
            assert_eq!(m.name().parse::<MethodVariant>().unwrap(), m);
        }
        assert_eq!("AKD-OR-BCE".parse::<MethodVariant>().unwrap(), MethodVariant::AkdOrBce);
        assert!("podnet".parse::<MethodVariant>().is_err());
    }

    #[test]
    fn out_of_order_task_is_protocol_error() {
        let exp = Experiment::from_config(small_config(MethodVariant::Akd)).unwrap();
        let mut state = exp.init_state();
        assert!(matches!(exp.train_task(&mut state, 1), Err(Error::Protocol(_))));
        exp.train_task(&mut state, 0).unwrap();
        assert!(matches!(exp.train_task(&mut state, 0), Err(Error::Protocol(_))));
    }

    #[test]
    fn first_task_has_only_classification_loss() {
        let exp = Experiment::from_config(small_config(MethodVariant::Rebll)).unwrap();
        let mut state = exp.init_state();
        let rows = exp.task_rows(0);
        let (b, _) = exp.batch_gradient(&mut state, 0, &rows[..8]).unwrap();
        assert_eq!(b.distill, None);
        assert_eq!(b.replay, None);
        assert_eq!(b.total, b.cls);
    }

    #[test]
    fn snapshot_present_after_first_task() {
        let exp = Experiment::from_config(small_config(MethodVariant::Kd)).unwrap();
        let mut state = exp.init_state();
        assert!(state.snapshot.is_none());
        exp.train_task(&mut state, 0).unwrap();
        assert_eq!(state.snapshot.as_ref().unwrap().task(), 0);
        assert_eq!(state.snapshot.as_ref().unwrap().params(), state.model.params());
    }

    #[test]
    fn non_replay_variants_leave_memory_empty() {
        for m in [MethodVariant::FineTuning, MethodVariant::Kd, MethodVariant::Akd] {
            let exp = Experiment::from_config(small_config(m)).unwrap();
            let (_, state) = exp.run().unwrap();
            assert!(state.memory.is_empty());
        }
    }
}
