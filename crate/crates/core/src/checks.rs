//! Randomized finite-difference checks of every loss, pushed through the model.
//!
//! Each draw builds a small random classifier, a random batch and a random
//! split of the outputs into old, current and future classes, then compares
//! the analytic parameter gradient of the chosen loss against central
//! differences.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::data::TriStateLabels;
use crate::error::{Error, Result};
use crate::losses::{akd_loss, bce_loss, cls_loss, er_loss, kd_loss, loss_weights, LossValue};
use crate::numeric::{grad_check, Activation, ClassifierModel, GradCheckOptions, GradCheckReport, Gradients, Predictor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Bce,
    Kd,
    Cls,
    Akd,
    Er,
    Composite,
}

impl LossKind {
    pub const ALL: [LossKind; 6] = [
        LossKind::Bce,
        LossKind::Kd,
        LossKind::Cls,
        LossKind::Akd,
        LossKind::Er,
        LossKind::Composite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Bce => "bce",
            LossKind::Kd => "kd",
            LossKind::Cls => "cls",
            LossKind::Akd => "akd",
            LossKind::Er => "er",
            LossKind::Composite => "composite",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("loss", format!("unknown loss `{s}`")))
    }
}

/// One random problem instance.
#[derive(Debug, Clone)]
pub struct Draw {
    pub model: ClassifierModel,
    pub teacher: ClassifierModel,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<TriStateLabels>,
    pub replay_features: Vec<Vec<f64>>,
    pub replay_labels: Vec<TriStateLabels>,
    pub old_classes: Vec<usize>,
    pub current_classes: Vec<usize>,
    pub gamma_pos: f64,
    pub gamma_neg: f64,
    pub lambda_akd: f64,
    pub lambda_er: f64,
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn random_model<R: Rng + ?Sized>(rng: &mut R, d: usize, h: usize, c: usize) -> ClassifierModel {
    let activation = if rng.random_bool(0.5) { Activation::Tanh } else { Activation::Relu };
    let mut model = ClassifierModel::init(d, h, c, Activation::Tanh, rng).with_activation(activation);
    for v in model.params_mut() {
        *v += 0.3 * rng.sample::<f64, _>(StandardNormal);
    }
    model
}

fn random_labels<R: Rng + ?Sized>(rng: &mut R, c: usize, annotated: &[usize]) -> TriStateLabels {
    let full: Vec<u8> = (0..c).map(|_| rng.random_bool(0.4) as u8).collect();
    TriStateLabels::masked(&full, annotated)
}

impl Draw {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Draw {
        let d = rng.random_range(2..=5);
        let h = rng.random_range(2..=6);
        let c = rng.random_range(3..=7);
        let n_old = rng.random_range(1..c);
        let n_cur = rng.random_range(1..=c - n_old);
        let old_classes: Vec<usize> = (0..n_old).collect();
        let current_classes: Vec<usize> = (n_old..n_old + n_cur).collect();
        let batch = rng.random_range(1..=4);
        let replay = rng.random_range(1..=4);
        let features = (0..batch).map(|_| gaussian_vec(rng, d)).collect();
        let labels = (0..batch).map(|_| random_labels(rng, c, &current_classes)).collect();
        let replay_features = (0..replay).map(|_| gaussian_vec(rng, d)).collect();
        let replay_labels = (0..replay).map(|_| random_labels(rng, c, &old_classes)).collect();
        Draw {
            model: random_model(rng, d, h, c),
            teacher: random_model(rng, d, h, c),
            features,
            labels,
            replay_features,
            replay_labels,
            old_classes,
            current_classes,
            gamma_pos: rng.random_range(0.0..4.0),
            gamma_neg: rng.random_range(0.0..4.0),
            lambda_akd: rng.random_range(0.0..=1.0),
            lambda_er: rng.random_range(0.0..=1.0),
        }
    }

    fn batch_term<F>(
        &self,
        model: &ClassifierModel,
        features: &[Vec<f64>],
        weight: f64,
        grads: &mut Gradients,
        mut term: F,
    ) -> Result<f64>
    where
        F: FnMut(usize, &[f64], &[f64]) -> Result<LossValue>,
    {
        let scale = weight / features.len() as f64;
        let mut total = 0.0;
        for (i, x) in features.iter().enumerate() {
            let trace = model.forward_trace(x)?;
            let loss = term(i, x, &trace.probs)?;
            let mut out = vec![0.0; model.output_dim()];
            loss.scatter_into(&mut out, 1.0);
            model.accumulate_backward(x, &trace, &out, scale, grads)?;
            total += scale * loss.value;
        }
        Ok(total)
    }

    /// Batch-mean loss of `kind` at `model` and its parameter gradient.
    pub fn loss(&self, kind: LossKind, model: &ClassifierModel) -> Result<(f64, Gradients)> {
        let mut grads = Gradients::zeros_like(model);
        let teacher = |x: &[f64]| self.teacher.forward(x);
        let (old, cur) = (&self.old_classes, &self.current_classes);
        let value = match kind {
            LossKind::Bce => self.batch_term(model, &self.features, 1.0, &mut grads, |i, _, p| {
                bce_loss(p, &self.labels[i], cur)
            })?,
            LossKind::Cls => self.batch_term(model, &self.features, 1.0, &mut grads, |i, _, p| {
                cls_loss(p, &self.labels[i], cur, self.gamma_pos)
            })?,
            LossKind::Kd => self.batch_term(model, &self.features, 1.0, &mut grads, |_, x, p| {
                kd_loss(p, &teacher(x)?, old)
            })?,
            LossKind::Akd => self.batch_term(model, &self.features, 1.0, &mut grads, |_, x, p| {
                akd_loss(p, &teacher(x)?, old, self.gamma_pos)
            })?,
            LossKind::Er => self.batch_term(model, &self.replay_features, 1.0, &mut grads, |i, _, p| {
                er_loss(p, &self.replay_labels[i], old, self.gamma_neg)
            })?,
            LossKind::Composite => {
                let (w_cls, w_akd) = loss_weights(true, self.lambda_akd);
                let cls = self.batch_term(model, &self.features, w_cls, &mut grads, |i, _, p| {
                    cls_loss(p, &self.labels[i], cur, self.gamma_pos)
                })?;
                let akd = self.batch_term(model, &self.features, w_akd, &mut grads, |_, x, p| {
                    akd_loss(p, &teacher(x)?, old, self.gamma_pos)
                })?;
                let er = self.batch_term(model, &self.replay_features, self.lambda_er, &mut grads, |i, _, p| {
                    er_loss(p, &self.replay_labels[i], old, self.gamma_neg)
                })?;
                cls + akd + er
            }
        };
        Ok((value, grads))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LossCheck {
    pub loss: LossKind,
    pub draws: usize,
    /// Report of the draw with the largest relative error.
    pub worst: GradCheckReport,
}

impl LossCheck {
    pub fn passed(&self) -> bool {
        self.worst.passed()
    }
}

/// Runs `draws` random instances of `kind`; the stream depends only on `seed`
/// and `kind`.
pub fn check_loss(kind: LossKind, draws: usize, seed: u64, opts: GradCheckOptions) -> Result<LossCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (kind as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut worst: Option<GradCheckReport> = None;
    for _ in 0..draws {
        let draw = Draw::random(&mut rng);
        let report = grad_check(&draw.model, |m| draw.loss(kind, m), opts)?;
        worst = Some(match worst {
            Some(w) => w.worst(report),
            None => report,
        });
    }
    let worst = worst.ok_or_else(|| Error::Validation("gradient check needs at least one draw".into()))?;
    Ok(LossCheck { loss: kind, draws, worst })
}

pub fn check_all(draws: usize, seed: u64, opts: GradCheckOptions) -> Result<Vec<LossCheck>> {
    LossKind::ALL
        .into_iter()
        .map(|kind| check_loss(kind, draws, seed, opts))
        .collect()
}
