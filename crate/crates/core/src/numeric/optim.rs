//! Adam with bias correction. Weight decay is the classic L2 form: `wd * θ` is
//! added to the raw gradient before the moment updates.

use serde::{Deserialize, Serialize};

use super::model::{ClassifierModel, Gradients};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step: u64,
}

impl OptimizerState {
    pub fn new(model: &ClassifierModel, config: AdamConfig) -> Self {
        OptimizerState {
            config,
            first_moment: vec![0.0; model.param_count()],
            second_moment: vec![0.0; model.param_count()],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.config.learning_rate = lr;
    }

    /// Applies one update in place. The model is left untouched on error.
    pub fn step(&mut self, model: &mut ClassifierModel, grads: &Gradients) -> Result<()> {
        if grads.values.len() != model.param_count() {
            return Err(Error::Shape {
                context: "optimizer gradients",
                expected: model.param_count(),
                actual: grads.values.len(),
            });
        }
        if let Some(i) = grads.values.iter().position(|g| !g.is_finite()) {
            return Err(Error::NumericalInstability {
                param: model.param_name(i),
            });
        }
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            weight_decay,
        } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        let params = model.params_mut();
        for (i, theta) in params.iter_mut().enumerate() {
            let g = grads.values[i] + weight_decay * *theta;
            let m = beta1 * self.first_moment[i] + (1.0 - beta1) * g;
            let v = beta2 * self.second_moment[i] + (1.0 - beta2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            let m_hat = m / bias1;
            let v_hat = v / bias2;
            *theta -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}
