//! Datasets, `{Bx-Cy}` schedules, partial-label masking and synthetic data.

mod dataset;
mod labels;
mod schedule;
mod synth;

pub use dataset::{load_dataset, Dataset, Split};
pub use labels::{Label, TriStateLabels};
pub use schedule::{Scenario, TaskSchedule};
pub use synth::{draw_prototypes, synth_dataset, Prototypes, SynthSpec};

/// Partial-label view of one sample for task training: only `task_classes`
/// keep their ground truth.
pub fn mask_labels(full_labels: &[u8], task_classes: &[usize]) -> TriStateLabels {
    TriStateLabels::masked(full_labels, task_classes)
}
