//! One-hidden-layer multi-label classifier with hand-written backpropagation.
//!
//! Parameters live in a single flat buffer laid out as
//! `[w1 (hidden x input), b1 (hidden), w2 (output x hidden), b2 (output)]`,
//! all row-major. [`Gradients`] shares the same layout so the optimizer and the
//! gradient checker can treat every parameter uniformly.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before any logarithm.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `a` and pre-activation `z`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Clamp into the open unit interval used by every loss.
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    activation: Activation,
    params: Vec<f64>,
}

/// Parameter gradients, same layout as [`ClassifierModel::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub values: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &ClassifierModel) -> Self {
        Gradients {
            values: vec![0.0; model.param_count()],
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|g| *g *= factor);
    }

    pub fn add_scaled(&mut self, other: &Gradients, factor: f64) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Intermediate values of one forward pass, reused by the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub pre_hidden: Vec<f64>,
    pub hidden: Vec<f64>,
    /// Clamped output probabilities.
    pub probs: Vec<f64>,
    /// Whether each output sat on a clamp boundary (zero local derivative).
    pub clamped: Vec<bool>,
}

/// Anything that maps a feature vector to per-class probabilities.
pub trait Predictor {
    fn output_dim(&self) -> usize;
    fn predict(&self, features: &[f64]) -> Result<Vec<f64>>;
}

impl ClassifierModel {
    pub fn zeros(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        let count = hidden_dim * input_dim + hidden_dim + output_dim * hidden_dim + output_dim;
        ClassifierModel {
            input_dim,
            hidden_dim,
            output_dim,
            activation: Activation::Tanh,
            params: vec![0.0; count],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let mut model = Self::zeros(input_dim, hidden_dim, output_dim);
        model.activation = activation;
        let l1 = (6.0 / (input_dim + hidden_dim) as f64).sqrt();
        let l2 = (6.0 / (hidden_dim + output_dim) as f64).sqrt();
        let u1 = Uniform::new_inclusive(-l1, l1).expect("finite bounds");
        let u2 = Uniform::new_inclusive(-l2, l2).expect("finite bounds");
        let (w1, _, w2, _) = model.offsets();
        for v in &mut model.params[w1..w1 + hidden_dim * input_dim] {
            *v = u1.sample(rng);
        }
        for v in &mut model.params[w2..w2 + output_dim * hidden_dim] {
            *v = u2.sample(rng);
        }
        model
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> (usize, usize, usize, usize) {
        let w1 = 0;
        let b1 = self.hidden_dim * self.input_dim;
        let w2 = b1 + self.hidden_dim;
        let b2 = w2 + self.output_dim * self.hidden_dim;
        (w1, b1, w2, b2)
    }

    /// Human-readable name of a flat parameter index, e.g. `w2[3,1]`.
    pub fn param_name(&self, index: usize) -> String {
        let (_, b1, w2, b2) = self.offsets();
        if index < b1 {
            format!("w1[{},{}]", index / self.input_dim, index % self.input_dim)
        } else if index < w2 {
            format!("b1[{}]", index - b1)
        } else if index < b2 {
            let k = index - w2;
            format!("w2[{},{}]", k / self.hidden_dim, k % self.hidden_dim)
        } else {
            format!("b2[{}]", index - b2)
        }
    }

    pub fn forward_trace(&self, features: &[f64]) -> Result<ForwardTrace> {
        if features.len() != self.input_dim {
            return Err(Error::Shape {
                context: "forward features",
                expected: self.input_dim,
                actual: features.len(),
            });
        }
        let (w1, b1, w2, b2) = self.offsets();
        let p = &self.params;
        let mut pre_hidden = Vec::with_capacity(self.hidden_dim);
        let mut hidden = Vec::with_capacity(self.hidden_dim);
        for j in 0..self.hidden_dim {
            let row = &p[w1 + j * self.input_dim..w1 + (j + 1) * self.input_dim];
            let z = p[b1 + j] + row.iter().zip(features).map(|(w, x)| w * x).sum::<f64>();
            pre_hidden.push(z);
            hidden.push(self.activation.apply(z));
        }
        let mut probs = Vec::with_capacity(self.output_dim);
        let mut clamped = Vec::with_capacity(self.output_dim);
        for k in 0..self.output_dim {
            let row = &p[w2 + k * self.hidden_dim..w2 + (k + 1) * self.hidden_dim];
            let z = p[b2 + k] + row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>();
            let raw = logistic(z);
            let c = clamp_prob(raw);
            clamped.push(c != raw);
            probs.push(c);
        }
        Ok(ForwardTrace {
            pre_hidden,
            hidden,
            probs,
            clamped,
        })
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(features)?.probs)
    }

    /// Gradients of a loss with respect to every parameter given `dL/d(prob)`.
    pub fn backward(&self, features: &[f64], output_gradient: &[f64]) -> Result<Gradients> {
        let trace = self.forward_trace(features)?;
        let mut grads = Gradients::zeros_like(self);
        self.accumulate_backward(features, &trace, output_gradient, 1.0, &mut grads)?;
        Ok(grads)
    }

    /// Adds `scale * dL/dθ` into `grads` using a previously computed trace.
    pub fn accumulate_backward(
        &self,
        features: &[f64],
        trace: &ForwardTrace,
        output_gradient: &[f64],
        scale: f64,
        grads: &mut Gradients,
    ) -> Result<()> {
        if output_gradient.len() != self.output_dim {
            return Err(Error::Shape {
                context: "backward output gradient",
                expected: self.output_dim,
                actual: output_gradient.len(),
            });
        }
        if features.len() != self.input_dim {
            return Err(Error::Shape {
                context: "backward features",
                expected: self.input_dim,
                actual: features.len(),
            });
        }
        if grads.values.len() != self.params.len() {
            return Err(Error::Shape {
                context: "backward gradient buffer",
                expected: self.params.len(),
                actual: grads.values.len(),
            });
        }
        let (w1, b1, w2, b2) = self.offsets();
        let p = &self.params;
        let g = &mut grads.values;

        let mut d_hidden = vec![0.0; self.hidden_dim];
        for k in 0..self.output_dim {
            if trace.clamped[k] || output_gradient[k] == 0.0 {
                continue;
            }
            let prob = trace.probs[k];
            let dz = scale * output_gradient[k] * prob * (1.0 - prob);
            g[b2 + k] += dz;
            let row = w2 + k * self.hidden_dim;
            for j in 0..self.hidden_dim {
                g[row + j] += dz * trace.hidden[j];
                d_hidden[j] += dz * p[row + j];
            }
        }
        for j in 0..self.hidden_dim {
            let dz = d_hidden[j] * self.activation.derivative(trace.pre_hidden[j], trace.hidden[j]);
            if dz == 0.0 {
                continue;
            }
            g[b1 + j] += dz;
            let row = w1 + j * self.input_dim;
            for (i, x) in features.iter().enumerate() {
                g[row + i] += dz * x;
            }
        }
        Ok(())
    }

    pub fn snapshot(&self, task: usize) -> ModelSnapshot {
        ModelSnapshot {
            model: self.clone(),
            task,
        }
    }
}

impl Predictor for ClassifierModel {
    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn predict(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.forward(features)
    }
}

/// Frozen copy of a model taken at a task boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSnapshot {
    model: ClassifierModel,
    task: usize,
}

impl ModelSnapshot {
    /// Task index whose training produced these parameters.
    pub fn task(&self) -> usize {
        self.task
    }

    pub fn params(&self) -> &[f64] {
        self.model.params()
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.model.forward(features)
    }

    /// A trainable copy of the frozen parameters.
    pub fn to_model(&self) -> ClassifierModel {
        self.model.clone()
    }
}

impl Predictor for ModelSnapshot {
    fn output_dim(&self) -> usize {
        self.model.output_dim
    }

    fn predict(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.forward(features)
    }
}
