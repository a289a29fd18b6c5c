use mlcil_core::checks::{check_loss, LossKind};
use mlcil_core::numeric::GradCheckOptions;

fn assert_loss(kind: LossKind) {
    let check = check_loss(kind, 120, 2024, GradCheckOptions::default()).unwrap();
    assert_eq!(check.draws, 120);
    assert!(
        check.passed(),
        "{kind}: max relative error {:.3e} at {} (analytic {}, numeric {})",
        check.worst.max_relative_error,
        check.worst.worst_param,
        check.worst.analytic,
        check.worst.numeric
    );
}

#[test]
fn bce_gradient_matches_finite_differences() {
    assert_loss(LossKind::Bce);
}

#[test]
fn kd_gradient_matches_finite_differences() {
    assert_loss(LossKind::Kd);
}

#[test]
fn cls_gradient_matches_finite_differences() {
    assert_loss(LossKind::Cls);
}

#[test]
fn akd_gradient_matches_finite_differences() {
    assert_loss(LossKind::Akd);
}

#[test]
fn er_gradient_matches_finite_differences() {
    assert_loss(LossKind::Er);
}

#[test]
fn composite_gradient_matches_finite_differences() {
    assert_loss(LossKind::Composite);
}

#[test]
fn a_wrong_sign_is_caught() {
    use mlcil_core::checks::Draw;
    use mlcil_core::numeric::grad_check;
    use rand::SeedableRng;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let draw = Draw::random(&mut rng);
    let report = grad_check(
        &draw.model,
        |m| {
            let (v, mut g) = draw.loss(LossKind::Cls, m)?;
            g.scale(-1.0);
            Ok((v, g))
        },
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(!report.passed());
}
