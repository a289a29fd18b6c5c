//! Binary cross-entropy, distillation and their asymmetric variants.
//!
//! Every loss here is a sum over a class subset of one per-class term
//!
//! ```text
//! ℓ(t, p) = -t · (1-p)^γ₊ · ln p  -  (1-t) · p^γ₋ · ln(1-p)
//! ```
//!
//! with target `t` (hard label or teacher probability) and prediction `p`:
//!
//! | loss        | target            | γ₊     | γ₋     |
//! |-------------|-------------------|--------|--------|
//! | `bce_loss`  | ground truth      | 0      | 0      |
//! | `kd_loss`   | old-model prob.   | 0      | 0      |
//! | `cls_loss`  | ground truth      | γ      | 0      |
//! | `akd_loss`  | old-model prob.   | γ      | 0      |
//! | `er_loss`   | completed label   | 0      | γ      |
//!
//! The decay exponent γ grows with the number of classes seen so far, see
//! [`decay_exponent`]. `0^0` is taken as 1 so γ = 0 recovers plain BCE exactly.

use serde::{Deserialize, Serialize};

use crate::data::TriStateLabels;
use crate::error::{Error, Result};
use crate::numeric::clamp_prob;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Ten,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecayMode {
    /// γ = coef · log |classes seen|
    #[default]
    Adaptive,
    /// γ = coef
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossHyperParams {
    /// Decay coefficient for the positive parts of the classification and distillation losses.
    pub alpha: f64,
    /// Decay coefficient for the negative part of the replay loss.
    pub beta: f64,
    pub lambda_akd: f64,
    pub lambda_er: f64,
    pub log_base: LogBase,
    pub decay_mode: DecayMode,
}

impl Default for LossHyperParams {
    fn default() -> Self {
        LossHyperParams {
            alpha: 1.2,
            beta: 0.7,
            lambda_akd: 0.15,
            lambda_er: 0.30,
            log_base: LogBase::Natural,
            decay_mode: DecayMode::Adaptive,
        }
    }
}

impl LossHyperParams {
    /// Zero coefficients are accepted; they switch the decay off.
    pub fn validate(&self) -> Result<()> {
        let check = |key: &str, v: f64, ok: bool, why: &str| {
            if v.is_finite() && ok {
                Ok(())
            } else {
                Err(Error::config(format!("loss.{key}"), format!("{v} {why}")))
            }
        };
        check("alpha", self.alpha, self.alpha >= 0.0, "must be >= 0")?;
        check("beta", self.beta, self.beta >= 0.0, "must be >= 0")?;
        check(
            "lambda_akd",
            self.lambda_akd,
            (0.0..=1.0).contains(&self.lambda_akd),
            "must lie in [0, 1]",
        )?;
        check("lambda_er", self.lambda_er, self.lambda_er >= 0.0, "must be >= 0")?;
        Ok(())
    }

    fn exponent(&self, coef: f64, class_count: usize) -> Result<f64> {
        if class_count == 0 {
            return Err(Error::Domain("decay exponent needs at least one class".into()));
        }
        Ok(match self.decay_mode {
            DecayMode::Fixed => coef,
            DecayMode::Adaptive => match self.log_base {
                LogBase::Natural => decay_exponent(coef, class_count)?,
                LogBase::Ten => coef * (class_count as f64).log10(),
            },
        })
    }

    /// Exponent on the positive parts of `cls_loss` / `akd_loss`.
    pub fn gamma_positive(&self, seen_classes: usize) -> Result<f64> {
        self.exponent(self.alpha, seen_classes)
    }

    /// Exponent on the negative part of `er_loss`.
    pub fn gamma_negative(&self, seen_classes: usize) -> Result<f64> {
        self.exponent(self.beta, seen_classes)
    }
}

/// `coef · ln(class_count)`.
pub fn decay_exponent(coef: f64, class_count: usize) -> Result<f64> {
    if class_count == 0 {
        return Err(Error::Domain("decay exponent needs at least one class".into()));
    }
    Ok(coef * (class_count as f64).ln())
}

/// Loss value with its gradient with respect to the predictions of `classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub classes: Vec<usize>,
    /// `grad[i]` is `dL / d pred[classes[i]]`.
    pub grad: Vec<f64>,
}

impl LossValue {
    pub fn zero() -> Self {
        LossValue {
            value: 0.0,
            classes: Vec::new(),
            grad: Vec::new(),
        }
    }

    /// Adds `scale · grad` into a full-width output gradient.
    pub fn scatter_into(&self, out: &mut [f64], scale: f64) {
        for (&c, g) in self.classes.iter().zip(&self.grad) {
            out[c] += scale * g;
        }
    }
}

/// One class's contribution and its derivative with respect to `p`.
pub fn asymmetric_term(target: f64, p: f64, gamma_pos: f64, gamma_neg: f64) -> (f64, f64) {
    let p = clamp_prob(p);
    let q = 1.0 - p;
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();

    let mut value = 0.0;
    let mut deriv = 0.0;
    if target != 0.0 {
        let weight = q.powf(gamma_pos);
        let d_weight = if gamma_pos == 0.0 {
            0.0
        } else {
            -gamma_pos * q.powf(gamma_pos - 1.0)
        };
        value -= target * weight * ln_p;
        deriv -= target * (d_weight * ln_p + weight / p);
    }
    if target != 1.0 {
        let weight = p.powf(gamma_neg);
        let d_weight = if gamma_neg == 0.0 {
            0.0
        } else {
            gamma_neg * p.powf(gamma_neg - 1.0)
        };
        value -= (1.0 - target) * weight * ln_q;
        deriv -= (1.0 - target) * (d_weight * ln_q - weight / q);
    }
    (value, deriv)
}

fn check_index(preds: &[f64], classes: &[usize]) -> Result<()> {
    if let Some(&c) = classes.iter().find(|&&c| c >= preds.len()) {
        return Err(Error::Alignment(format!(
            "class {c} outside prediction vector of length {}",
            preds.len()
        )));
    }
    Ok(())
}

fn hard_label_loss<E>(
    preds: &[f64],
    labels: &TriStateLabels,
    classes: &[usize],
    gamma_pos: f64,
    gamma_neg: f64,
    missing: E,
) -> Result<LossValue>
where
    E: Fn(usize) -> Error,
{
    check_index(preds, classes)?;
    if labels.len() != preds.len() {
        return Err(Error::Alignment(format!(
            "{} labels for {} predictions",
            labels.len(),
            preds.len()
        )));
    }
    let mut out = LossValue {
        value: 0.0,
        classes: classes.to_vec(),
        grad: Vec::with_capacity(classes.len()),
    };
    for &c in classes {
        let target = labels.get(c).target().ok_or_else(|| missing(c))?;
        let (v, d) = asymmetric_term(target, preds[c], gamma_pos, gamma_neg);
        out.value += v;
        out.grad.push(d);
    }
    Ok(out)
}

fn soft_target_loss(
    new_preds: &[f64],
    old_preds: &[f64],
    classes: &[usize],
    gamma_pos: f64,
) -> Result<LossValue> {
    if new_preds.len() != old_preds.len() {
        return Err(Error::Alignment(format!(
            "new predictions have {} classes, old predictions {}",
            new_preds.len(),
            old_preds.len()
        )));
    }
    check_index(new_preds, classes)?;
    let mut out = LossValue {
        value: 0.0,
        classes: classes.to_vec(),
        grad: Vec::with_capacity(classes.len()),
    };
    for &c in classes {
        let (v, d) = asymmetric_term(clamp_prob(old_preds[c]), new_preds[c], gamma_pos, 0.0);
        out.value += v;
        out.grad.push(d);
    }
    Ok(out)
}

/// Plain binary cross-entropy over `classes`; every class must be annotated.
pub fn bce_loss(preds: &[f64], labels: &TriStateLabels, classes: &[usize]) -> Result<LossValue> {
    hard_label_loss(preds, labels, classes, 0.0, 0.0, |class| Error::Annotation { class })
}

/// BCE restricted to whichever of `classes` are annotated. Used by naive replay,
/// where memory samples carry only the labels of the task they came from.
pub fn bce_loss_annotated(
    preds: &[f64],
    labels: &TriStateLabels,
    classes: &[usize],
) -> Result<LossValue> {
    let annotated: Vec<usize> = classes
        .iter()
        .copied()
        .filter(|&c| c < labels.len() && !labels.get(c).is_missing())
        .collect();
    bce_loss(preds, labels, &annotated)
}

/// Distillation against old-model probabilities over the old classes.
pub fn kd_loss(new_preds: &[f64], old_preds: &[f64], old_classes: &[usize]) -> Result<LossValue> {
    soft_target_loss(new_preds, old_preds, old_classes, 0.0)
}

/// Classification loss with the positive part down-weighted by `(1-p)^γ`.
pub fn cls_loss(
    preds: &[f64],
    labels: &TriStateLabels,
    current_classes: &[usize],
    gamma: f64,
) -> Result<LossValue> {
    hard_label_loss(preds, labels, current_classes, gamma, 0.0, |class| {
        Error::Annotation { class }
    })
}

/// Distillation with overconfident positive targets down-weighted by `(1-p)^γ`.
pub fn akd_loss(
    new_preds: &[f64],
    old_preds: &[f64],
    old_classes: &[usize],
    gamma: f64,
) -> Result<LossValue> {
    soft_target_loss(new_preds, old_preds, old_classes, gamma)
}

/// Replay loss on relabeled memory samples with the negative part
/// down-weighted by `p^γ`.
pub fn er_loss(
    preds: &[f64],
    completed_labels: &TriStateLabels,
    old_classes: &[usize],
    gamma: f64,
) -> Result<LossValue> {
    hard_label_loss(preds, completed_labels, old_classes, 0.0, gamma, |class| {
        Error::RelabelIncomplete { class }
    })
}

/// Weighted combination of the three loss terms.
///
/// Without a distillation term (`l_akd == None`) the classification loss
/// enters unscaled; a missing replay term contributes nothing.
pub fn total_loss(l_cls: f64, l_akd: Option<f64>, l_er: Option<f64>, lambda_akd: f64, lambda_er: f64) -> f64 {
    let (w_cls, w_akd) = loss_weights(l_akd.is_some(), lambda_akd);
    w_cls * l_cls + w_akd * l_akd.unwrap_or(0.0) + lambda_er * l_er.unwrap_or(0.0)
}

/// `(classification weight, distillation weight)`.
pub fn loss_weights(has_distillation: bool, lambda_akd: f64) -> (f64, f64) {
    if has_distillation {
        (lambda_akd, 1.0 - lambda_akd)
    } else {
        (1.0, 0.0)
    }
}
