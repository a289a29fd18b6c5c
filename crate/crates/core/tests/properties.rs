use std::collections::BTreeSet;

use mlcil_core::data::{load_dataset, mask_labels, Dataset, Label, Scenario, Split, TaskSchedule};
use mlcil_core::losses::{akd_loss, cls_loss, er_loss};
use mlcil_core::metrics::average_precision;
use mlcil_core::TriStateLabels;
use proptest::collection::vec;
use proptest::prelude::*;

fn class_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("c{i:02}")).collect()
}

fn scenario_and_classes() -> impl Strategy<Value = (Scenario, usize)> {
    (1usize..5, 1usize..5, 0usize..5).prop_map(|(inc, tasks, base_extra)| {
        let base = if base_extra == 0 { 0 } else { base_extra + inc };
        let classes = if base == 0 { inc * tasks } else { base + inc * (tasks - 1) };
        (Scenario::new(base, inc), classes)
    })
}

proptest! {
    #[test]
    fn schedule_partitions_classes((scenario, n) in scenario_and_classes()) {
        let schedule = TaskSchedule::build(scenario, &class_names(n)).unwrap();
        let mut seen = BTreeSet::new();
        for t in 0..schedule.task_count() {
            for &c in schedule.task_classes(t) {
                prop_assert!(seen.insert(c), "class {} in two tasks", c);
            }
            let through: BTreeSet<usize> = schedule.classes_through(t).into_iter().collect();
            prop_assert_eq!(&through, &seen);
        }
        prop_assert_eq!(seen, (0..n).collect::<BTreeSet<_>>());
    }

    #[test]
    fn masking_keeps_task_labels_and_hides_the_rest(
        full in vec(0u8..=1, 1..20),
        picks in vec(any::<bool>(), 20),
    ) {
        let classes: Vec<usize> = (0..full.len()).filter(|&c| picks[c]).collect();
        let masked = mask_labels(&full, &classes);
        for (c, &truth) in full.iter().enumerate() {
            if classes.contains(&c) {
                prop_assert_eq!(masked.get(c), Label::from_bool(truth == 1));
            } else {
                prop_assert_eq!(masked.get(c), Label::Missing);
            }
        }
    }

    #[test]
    fn ap_ignores_strictly_increasing_transforms(
        scores in vec(-5.0f64..5.0, 1..30),
        rel in vec(any::<bool>(), 30),
    ) {
        let rel = &rel[..scores.len()];
        let transformed: Vec<f64> = scores.iter().map(|s| (2.0 * s).exp() + 3.0).collect();
        prop_assert_eq!(average_precision(&scores, rel), average_precision(&transformed, rel));
    }

    #[test]
    fn dataset_csv_round_trips(
        rows in 1usize..12,
        dim in 1usize..5,
        classes in 1usize..5,
        seed_features in vec(-1e3f64..1e3, 60),
        seed_labels in vec(0u8..=1, 60),
    ) {
        let features: Vec<f64> = (0..rows * dim).map(|i| seed_features[i % 60] / 7.0).collect();
        let mut labels: Vec<u8> = (0..rows * classes).map(|i| seed_labels[i % 60]).collect();
        for r in 0..rows {
            labels[r * classes] = 1;
        }
        let ds = Dataset::new(features, labels, dim, class_names(classes), Split::Train).unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        ds.write_csv(file.path()).unwrap();
        let back = load_dataset(file.path(), Split::Train).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn losses_are_nonnegative_and_shrink_with_gamma(
        preds in vec(1e-9f64..1.0 - 1e-9, 1..8),
        targets in vec(0.0f64..=1.0, 8),
        hard in vec(0u8..=1, 8),
        g1 in 0.0f64..5.0,
        dg in 0.0f64..5.0,
    ) {
        let n = preds.len();
        let classes: Vec<usize> = (0..n).collect();
        let labels = TriStateLabels::from_full(&hard[..n]);
        let old = &targets[..n];
        let g2 = g1 + dg;
        let cls = |g| cls_loss(&preds, &labels, &classes, g).unwrap().value;
        let akd = |g| akd_loss(&preds, old, &classes, g).unwrap().value;
        let er = |g| er_loss(&preds, &labels, &classes, g).unwrap().value;
        for f in [&cls as &dyn Fn(f64) -> f64, &akd, &er] {
            prop_assert!(f(g1) >= 0.0);
            prop_assert!(f(g2) <= f(g1) + 1e-12);
        }
    }
}
