//! Synthetic multi-label data with label co-occurrence.
//!
//! Each class owns one or more prototype vectors. Classes `c` and
//! `c + classes/2` are look-alikes: their prototypes share a common component
//! whose share of the variance is `similarity`. A sample draws its positive
//! classes from independent Bernoulli trials, then each positive class pulls
//! in each of its two co-occurrence partners (`c ± classes/3`) with
//! probability `cooccurrence / 2`. Features are the sum of one prototype per positive class
//! plus isotropic Gaussian noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub classes: usize,
    pub feature_dim: usize,
    pub prototypes_per_class: usize,
    /// Expected number of partners a positive class switches on.
    pub cooccurrence: f64,
    /// Fraction of prototype variance shared between look-alike classes.
    pub similarity: f64,
    pub noise: f64,
    /// Expected positives per sample before co-occurrence and the
    /// at-least-one-positive rule are applied.
    pub positives_per_sample: f64,
    pub train_samples: usize,
    pub test_samples: usize,
    /// Set from the run configuration rather than the `[data.synth]` section.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            classes: 12,
            feature_dim: 32,
            prototypes_per_class: 2,
            cooccurrence: 0.1,
            similarity: 0.9,
            noise: 0.2,
            positives_per_sample: 1.0,
            train_samples: 1500,
            test_samples: 600,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Spec("at least 2 classes are required".into()));
        }
        if self.feature_dim < 2 {
            return Err(Error::Spec("feature_dim must be at least 2".into()));
        }
        if self.prototypes_per_class == 0 {
            return Err(Error::Spec("prototypes_per_class must be at least 1".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Spec("noise must be finite and non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.cooccurrence) {
            return Err(Error::Spec("cooccurrence must lie in [0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.similarity) {
            return Err(Error::Spec("similarity must lie in [0, 1)".into()));
        }
        if !(self.positives_per_sample > 0.0 && self.positives_per_sample <= self.classes as f64) {
            return Err(Error::Spec(
                "positives_per_sample must lie in (0, classes]".into(),
            ));
        }
        if self.train_samples == 0 || self.test_samples == 0 {
            return Err(Error::Spec("both splits need at least one sample".into()));
        }
        Ok(())
    }

    pub fn class_names(&self) -> Vec<String> {
        (0..self.classes).map(|i| format!("class_{i:02}")).collect()
    }

    /// The two partner classes used for co-occurrence coupling.
    pub fn partners(&self, class: usize) -> [usize; 2] {
        let k = (self.classes / 3).max(1);
        [(class + k) % self.classes, (class + self.classes - k) % self.classes]
    }

    /// Index of the prototype component shared by look-alike classes.
    pub fn lookalike_group(&self, class: usize) -> usize {
        class % (self.classes / 2).max(1)
    }
}

/// Class prototypes; `prototypes[c][k]` is the k-th mode of class c.
#[derive(Debug, Clone)]
pub struct Prototypes {
    pub vectors: Vec<Vec<Vec<f64>>>,
}

pub fn draw_prototypes<R: Rng + ?Sized>(spec: &SynthSpec, rng: &mut R) -> Prototypes {
    // expected norm 2
    let scale = 1.0 / (spec.feature_dim as f64).sqrt() * 2.0;
    let gaussian = |rng: &mut R| -> Vec<f64> {
        (0..spec.feature_dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                scale * z
            })
            .collect()
    };
    let groups = (spec.classes / 2).max(1);
    let shared: Vec<Vec<f64>> = (0..groups).map(|_| gaussian(rng)).collect();
    let (ws, wu) = (spec.similarity.sqrt(), (1.0 - spec.similarity).sqrt());
    let vectors = (0..spec.classes)
        .map(|c| {
            let common = &shared[spec.lookalike_group(c)];
            (0..spec.prototypes_per_class)
                .map(|_| {
                    gaussian(rng)
                        .into_iter()
                        .zip(common)
                        .map(|(u, s)| ws * s + wu * u)
                        .collect()
                })
                .collect()
        })
        .collect();
    Prototypes { vectors }
}

fn draw_labels<R: Rng + ?Sized>(spec: &SynthSpec, rng: &mut R) -> Vec<u8> {
    let c = spec.classes;
    let base_rate = (spec.positives_per_sample / (c as f64 * (1.0 + spec.cooccurrence))).min(1.0);
    let mut labels = vec![0u8; c];
    for l in labels.iter_mut() {
        *l = rng.random_bool(base_rate) as u8;
    }
    if labels.iter().all(|&v| v == 0) {
        labels[rng.random_range(0..c)] = 1;
    }
    if spec.cooccurrence > 0.0 {
        let drawn = labels.clone();
        for (class, &v) in drawn.iter().enumerate() {
            if v == 1 {
                for partner in spec.partners(class) {
                    if rng.random_bool(spec.cooccurrence / 2.0) {
                        labels[partner] = 1;
                    }
                }
            }
        }
    }
    labels
}

fn draw_split<R: Rng + ?Sized>(
    spec: &SynthSpec,
    protos: &Prototypes,
    rows: usize,
    split: Split,
    rng: &mut R,
) -> Result<Dataset> {
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::Spec(e.to_string()))?;
    let mut features = Vec::with_capacity(rows * spec.feature_dim);
    let mut labels = Vec::with_capacity(rows * spec.classes);
    for _ in 0..rows {
        let y = draw_labels(spec, rng);
        let mut x = vec![0.0; spec.feature_dim];
        for (class, _) in y.iter().enumerate().filter(|(_, &v)| v == 1) {
            let k = rng.random_range(0..spec.prototypes_per_class);
            for (xi, pi) in x.iter_mut().zip(&protos.vectors[class][k]) {
                *xi += pi;
            }
        }
        if spec.noise > 0.0 {
            for xi in x.iter_mut() {
                *xi += noise.sample(rng);
            }
        }
        features.extend(x);
        labels.extend(y);
    }
    Dataset::new(features, labels, spec.feature_dim, spec.class_names(), split)
}

/// Deterministic in `spec.seed`. Returns `(train, test)`.
pub fn synth_dataset(spec: &SynthSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let protos = draw_prototypes(spec, &mut rng);
    let train = draw_split(spec, &protos, spec.train_samples, Split::Train, &mut rng)?;
    let test = draw_split(spec, &protos, spec.test_samples, Split::Test, &mut rng)?;
    Ok((train, test))
}
