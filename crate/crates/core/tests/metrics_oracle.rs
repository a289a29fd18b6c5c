//! `evaluate_predictions` against a brute-force reference on small instances.

mod common;

use mlcil_core::metrics::average_precision;

#[test]
fn evaluation_matches_brute_force_on_small_instances() {
    common::metric_oracle(1000, 99).unwrap();
}

#[test]
fn reference_agrees_on_a_hand_worked_ranking() {
    // Ranking: 0.9 (rel), 0.8, 0.7 (rel), 0.7 (rel, later index)
    let scores = [0.9, 0.8, 0.7, 0.7];
    let rel = [true, false, true, true];
    let want = (1.0 + 2.0 / 3.0 + 3.0 / 4.0) / 3.0;
    assert!((common::reference_ap(&scores, &rel).unwrap() - want).abs() < 1e-15);
    assert!((average_precision(&scores, &rel).unwrap() - want).abs() < 1e-15);
}
