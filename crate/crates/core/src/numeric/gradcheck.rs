//! Central finite-difference gradient checking over every model parameter.

use serde::Serialize;

use super::model::{ClassifierModel, Gradients};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Perturbation applied symmetrically to each parameter.
    pub step: f64,
    /// Relative error threshold for [`GradCheckReport::passed`].
    pub tolerance: f64,
    /// Lower bound on the relative-error denominator, so that gradients
    /// that are nearly zero are compared in absolute terms.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-6,
            tolerance: 1e-5,
            floor: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_index: usize,
    pub worst_param: String,
    pub analytic: f64,
    pub numeric: f64,
    pub params_checked: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error <= self.tolerance
    }

    /// Keeps whichever of the two reports has the larger error.
    pub fn worst(self, other: GradCheckReport) -> GradCheckReport {
        if other.max_relative_error > self.max_relative_error {
            other
        } else {
            self
        }
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / denom
}

/// Compares the analytic gradient produced by `loss` at `model` against
/// central differences of its value.
///
/// `loss` returns the scalar loss together with its analytic gradient; only the
/// value is used at perturbed points.
pub fn grad_check<F>(model: &ClassifierModel, mut loss: F, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: FnMut(&ClassifierModel) -> Result<(f64, Gradients)>,
{
    let (_, analytic) = loss(model)?;
    if analytic.values.len() != model.param_count() {
        return Err(Error::Shape {
            context: "grad_check analytic gradient",
            expected: model.param_count(),
            actual: analytic.values.len(),
        });
    }
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_index: 0,
        worst_param: model.param_name(0),
        analytic: analytic.values.first().copied().unwrap_or(0.0),
        numeric: 0.0,
        params_checked: 0,
        tolerance: opts.tolerance,
    };
    for i in 0..model.param_count() {
        let original = probe.params()[i];
        let mut eval = |offset: f64, probe: &mut ClassifierModel| -> Result<f64> {
            probe.params_mut()[i] = original + offset;
            let (value, _) = loss(probe)?;
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss {
                    param: model.param_name(i),
                    offset,
                });
            }
            Ok(value)
        };
        let plus = eval(opts.step, &mut probe)?;
        let minus = eval(-opts.step, &mut probe)?;
        probe.params_mut()[i] = original;
        let numeric = (plus - minus) / (2.0 * opts.step);
        let err = relative_error(analytic.values[i], numeric, opts.floor);
        if err > report.max_relative_error || i == 0 {
            report.max_relative_error = err;
            report.worst_index = i;
            report.worst_param = model.param_name(i);
            report.analytic = analytic.values[i];
            report.numeric = numeric;
        }
        report.params_checked += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::numeric::Activation;

    #[test]
    fn quadratic_loss_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = ClassifierModel::init(3, 4, 2, Activation::Tanh, &mut rng);
        let report = grad_check(
            &model,
            |m| {
                let value = m.params().iter().map(|p| 0.5 * p * p).sum();
                let grads = Gradients {
                    values: m.params().to_vec(),
                };
                Ok((value, grads))
            },
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_relative_error <= 1e-8, "{report:?}");
        assert_eq!(report.params_checked, model.param_count());
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let model = ClassifierModel::zeros(1, 1, 1);
        let report = grad_check(
            &model,
            |m| {
                let value = m.params().iter().map(|p| (p - 1.0).powi(2)).sum();
                Ok((value, Gradients::zeros_like(m)))
            },
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(!report.passed());
    }

    #[test]
    fn non_finite_perturbation_is_reported() {
        let model = ClassifierModel::zeros(1, 1, 1);
        let err = grad_check(
            &model,
            |m| {
                let v = if m.params()[2] > 0.0 { f64::NAN } else { 0.0 };
                Ok((v, Gradients::zeros_like(m)))
            },
            GradCheckOptions::default(),
        )
        .unwrap_err();
        match err {
            Error::NonFiniteLoss { param, offset } => {
                assert_eq!(param, "w2[0,0]");
                assert!(offset > 0.0);
            }
            other => panic!("unexpected {other}"),
        }
    }
}
