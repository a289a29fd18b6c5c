mod common;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use mlcil_core::data::TriStateLabels;
use mlcil_core::metrics::evaluate;
use mlcil_core::{parse_config_str, Experiment, MethodVariant, RunConfig};

fn config(method: MethodVariant, extra: &[&str]) -> RunConfig {
    let mut overrides: Vec<String> = [
        "data.synth.train_samples=400",
        "data.synth.test_samples=200",
        "train.epochs=4",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    overrides.push(format!("method=\"{}\"", method.name()));
    overrides.extend(extra.iter().map(|s| s.to_string()));
    parse_config_str("", &overrides).unwrap()
}

fn experiment(method: MethodVariant, extra: &[&str]) -> Experiment {
    Experiment::from_config(config(method, extra)).unwrap()
}

fn hash_params(params: &[f64]) -> u64 {
    let mut h = DefaultHasher::new();
    for p in params {
        p.to_bits().hash(&mut h);
    }
    h.finish()
}

#[test]
fn b4_c2_over_twelve_classes_reports_five_tasks() {
    let (report, _) = experiment(MethodVariant::FineTuning, &[]).run().unwrap();
    assert_eq!(report.rows.len(), 5);
    let spaces: Vec<usize> = report.rows.iter().map(|r| r.label_space).collect();
    assert_eq!(spaces, vec![4, 6, 8, 10, 12]);
    assert_eq!(report.rows.iter().map(|r| r.task).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
}

#[test]
fn single_task_last_equals_average() {
    let (report, _) = experiment(MethodVariant::Akd, &["schedule.scenario=\"B12-C4\""]).run().unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.last.map, report.avg_map);
}

#[test]
fn same_seed_gives_identical_runs() {
    let exp = experiment(MethodVariant::Rebll, &[]);
    let (a, state_a) = exp.run().unwrap();
    let (b, state_b) = exp.run().unwrap();
    assert_eq!(a.to_csv_string(), b.to_csv_string());
    assert_eq!(hash_params(state_a.model.params()), hash_params(state_b.model.params()));
    assert_eq!(state_a.optimizer.first_moment(), state_b.optimizer.first_moment());

    let (c, _) = experiment(MethodVariant::Rebll, &["seed=1"]).run().unwrap();
    assert_ne!(a.to_csv_string(), c.to_csv_string());
}

#[test]
fn rebll_without_replay_is_akd_bit_for_bit() {
    let (akd, akd_state) = experiment(MethodVariant::Akd, &[]).run().unwrap();
    let (rebll, rebll_state) = experiment(
        MethodVariant::Rebll,
        &["loss.lambda_er=0.0", "memory.per_class=0"],
    )
    .run()
    .unwrap();
    assert_eq!(akd, rebll);
    assert_eq!(
        hash_params(akd_state.model.params()),
        hash_params(rebll_state.model.params())
    );
    assert!(rebll_state.memory.is_empty());
}

#[test]
fn variants_without_replay_leave_memory_untouched() {
    for method in [MethodVariant::FineTuning, MethodVariant::Kd, MethodVariant::AkdCls, MethodVariant::Akd] {
        let (_, state) = experiment(method, &[]).run().unwrap();
        assert!(state.memory.is_empty(), "{method}");
        assert!(state.relabel_log.is_empty(), "{method}");
    }
}

/// Classes are laid out by output unit in `w2` rows and `b2`; returns the
/// class index a parameter feeds, if it belongs to the output layer.
fn output_class(name: &str) -> Option<usize> {
    let inner = name.strip_prefix("w2[").or_else(|| name.strip_prefix("b2["))?;
    inner.split([',', ']']).next()?.parse().ok()
}

#[test]
fn future_class_units_get_no_gradient() {
    let exp = experiment(MethodVariant::Rebll, &[]);
    let mut state = exp.init_state();
    for task in 0..3 {
        let rows = exp.task_rows(task);
        let (_, grads) = exp.batch_gradient(&mut state, task, &rows[..32]).unwrap();
        let seen = exp.schedule.classes_through(task);
        let mut touched_current = false;
        for (i, g) in grads.values.iter().enumerate() {
            let Some(class) = output_class(&state.model.param_name(i)) else { continue };
            if seen.contains(&class) {
                touched_current |= *g != 0.0;
            } else {
                assert_eq!(*g, 0.0, "task {task}: future class {class} got gradient");
            }
        }
        assert!(touched_current);
        exp.train_task(&mut state, task).unwrap();
    }
}

#[test]
fn classification_and_distillation_touch_their_own_classes() {
    let exp = experiment(MethodVariant::Akd, &[]);
    let mut state = exp.init_state();
    exp.train_task(&mut state, 0).unwrap();
    let task = 1;
    let current = exp.schedule.task_classes(task);
    let old = exp.schedule.classes_before(task);
    for &row in &exp.task_rows(task)[..20] {
        let x = exp.train.features(row);
        let probs = state.model.forward(x).unwrap();
        let labels = TriStateLabels::masked(exp.train.labels(row), current);
        let mut out = vec![0.0; exp.train.class_count()];
        let (_, distill) = exp
            .current_sample_gradient(&state, task, x, &probs, &labels, &mut out)
            .unwrap();
        assert!(distill.is_some());
        for (c, g) in out.iter().enumerate() {
            if !current.contains(&c) && !old.contains(&c) {
                assert_eq!(*g, 0.0);
            }
        }
        assert!(old.iter().any(|&c| out[c] != 0.0));
        assert!(current.iter().any(|&c| out[c] != 0.0));
    }
}

#[test]
fn snapshot_is_frozen_while_the_next_task_trains() {
    let exp = experiment(MethodVariant::Rebll, &[]);
    let mut state = exp.init_state();
    exp.train_task(&mut state, 0).unwrap();
    let end_of_task = hash_params(state.model.params());
    let snapshot = state.snapshot.clone().unwrap();
    assert_eq!(snapshot.task(), 0);
    assert_eq!(hash_params(snapshot.params()), end_of_task);

    let rows = exp.task_rows(1);
    for batch in rows.chunks(32) {
        let (_, grads) = exp.batch_gradient(&mut state, 1, batch).unwrap();
        state.optimizer.step(&mut state.model, &grads).unwrap();
        assert_eq!(hash_params(state.snapshot.as_ref().unwrap().params()), end_of_task);
    }
    assert_ne!(hash_params(state.model.params()), end_of_task);
}

#[test]
fn fine_tuning_forgets_the_first_task() {
    // Default desk benchmark, two tasks, mean over five seeds.
    let (mut before, mut after) = (0.0, 0.0);
    for seed in 0..5 {
        let overrides = vec![format!("seed={seed}"), "method=\"fine_tuning\"".to_string()];
        let exp = Experiment::from_config(parse_config_str("", &overrides).unwrap()).unwrap();
        let first = exp.schedule.task_classes(0).to_vec();
        let rows = exp.test.rows_with_positive_in(&first);
        let mut state = exp.init_state();
        exp.train_task(&mut state, 0).unwrap();
        before += evaluate(1, &state.model, &exp.test, &rows, &first, 0.5).unwrap().map;
        exp.train_task(&mut state, 1).unwrap();
        after += evaluate(1, &state.model, &exp.test, &rows, &first, 0.5).unwrap().map;
    }
    assert!(after < before, "first-task mAP {} -> {}", before / 5.0, after / 5.0);
}

#[test]
fn relabeling_completes_memory_without_touching_ground_truth() {
    for method in [MethodVariant::AkdOrBce, MethodVariant::Rebll] {
        let exp = experiment(method, &[]);
        let (_, state) = exp.run().unwrap();
        common::or_coverage(&exp, &state).unwrap();
    }
}

#[test]
fn naive_replay_keeps_only_insertion_labels() {
    let exp = experiment(MethodVariant::AkdReplay, &[]);
    let (_, state) = exp.run().unwrap();
    assert!(state.relabel_log.is_empty());
    for sample in state.memory.samples() {
        let annotated: Vec<usize> = sample.labels.annotated().collect();
        assert_eq!(annotated, exp.schedule.task_classes(sample.source_task));
    }
}

#[test]
fn training_out_of_order_is_a_protocol_error() {
    let exp = experiment(MethodVariant::Kd, &[]);
    let mut state = exp.init_state();
    let err = exp.train_task(&mut state, 1).unwrap_err();
    assert!(matches!(err, mlcil_core::Error::Protocol(_)));
}
