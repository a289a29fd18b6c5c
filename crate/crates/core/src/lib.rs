//! Multi-label class-incremental learning engine.
//!
//! Tasks arrive as `{Bx-Cy}` class partitions; training samples carry labels
//! only for the current task's classes. The crate provides:
//!
//! - [`numeric`]: a one-hidden-layer classifier with analytic gradients, Adam,
//!   snapshots and a finite-difference gradient checker;
//! - [`losses`]: BCE and distillation plus their asymmetric, class-count-aware
//!   forms;
//! - [`data`]: datasets, schedules, partial-label masking, synthetic data;
//! - [`memory`]: per-class reservoir replay memory with online relabeling;
//! - [`trainer`]: the incremental loop over method variants;
//! - [`metrics`]: mAP, CF1, OF1, FPR and last/average aggregation;
//! - [`config`], [`ablation`], [`report`]: run configuration, variant ladders
//!   and on-disk artifacts.

pub mod ablation;
pub mod checks;
pub mod config;
pub mod data;
pub mod error;
pub mod losses;
pub mod memory;
pub mod metrics;
pub mod numeric;
pub mod report;
pub mod trainer;

pub use config::{parse_config, parse_config_str, RunConfig};
pub use data::{Dataset, Scenario, SynthSpec, TaskSchedule, TriStateLabels};
pub use error::{Error, Result};
pub use losses::{DecayMode, LossHyperParams, LossValue};
pub use memory::{MemoryBuffer, MemorySample};
pub use metrics::{MetricsReport, MetricsRow};
pub use numeric::{ClassifierModel, ModelSnapshot};
pub use trainer::{run_experiment, Experiment, MethodVariant, TrainState};
