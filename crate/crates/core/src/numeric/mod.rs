//! Dense numerical substrate: the classifier, its optimizer and a gradient checker.

mod gradcheck;
mod model;
mod optim;

pub use gradcheck::{grad_check, relative_error, GradCheckOptions, GradCheckReport};
pub use model::{
    clamp_prob, logistic, Activation, ClassifierModel, ForwardTrace, Gradients, ModelSnapshot,
    Predictor, PROB_EPS,
};
pub use optim::{AdamConfig, OptimizerState};
