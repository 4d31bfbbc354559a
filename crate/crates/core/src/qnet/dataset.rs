use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{FeatureShape, QnetError, Result};
use crate::rng;

/// Spread of the per-class mean patterns.
pub const CLASS_MEAN_STD: f64 = 0.45;
/// Per-feature noise around a class mean.
pub const SAMPLE_NOISE_STD: f64 = 1.0;

const MEANS_DOMAIN: u64 = 0x6d65_616e_7300_0001;
const SAMPLES_DOMAIN: u64 = 0x626c_6f62_7300_0002;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub class_count: usize,
    pub shape: FeatureShape,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, class_count: usize, shape: FeatureShape) -> Result<Self> {
        let ds = Self {
            samples,
            class_count,
            shape,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if s.label >= self.class_count {
                return Err(QnetError::Validation {
                    path: format!("samples[{i}].label"),
                    message: format!("label {} >= class count {}", s.label, self.class_count),
                });
            }
            if s.features.len() != self.shape.len() {
                return Err(QnetError::Validation {
                    path: format!("samples[{i}].features"),
                    message: format!(
                        "{} features, shape {} needs {}",
                        s.features.len(),
                        self.shape,
                        self.shape.len()
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.features.clone()).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }
}

/// The mean pattern of `class`. Independent of any dataset seed, so train
/// and test sets drawn with different seeds share one distribution.
pub fn class_mean(class: usize, shape: FeatureShape) -> Vec<f64> {
    let mut r = rng::keyed_stream(0, MEANS_DOMAIN, class as u64);
    (0..shape.len())
        .map(|_| CLASS_MEAN_STD * r.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Class-conditional Gaussian blobs with balanced labels (`label = i mod classes`).
pub fn generate_synthetic_dataset(
    seed: u64,
    n: usize,
    classes: usize,
    shape: FeatureShape,
) -> Result<Dataset> {
    if classes < 2 {
        return Err(QnetError::DatasetParams(format!(
            "need at least 2 classes, got {classes}"
        )));
    }
    if n < classes {
        return Err(QnetError::DatasetParams(format!(
            "{n} samples cannot cover {classes} classes"
        )));
    }
    if shape.is_empty() {
        return Err(QnetError::DatasetParams("empty feature shape".into()));
    }
    let means: Vec<Vec<f64>> = (0..classes).map(|c| class_mean(c, shape)).collect();
    let mut r = rng::seeded(seed, SAMPLES_DOMAIN);
    let samples = (0..n)
        .map(|i| {
            let label = i % classes;
            let features = means[label]
                .iter()
                .map(|m| m + SAMPLE_NOISE_STD * r.sample::<f64, _>(StandardNormal))
                .collect();
            Sample { features, label }
        })
        .collect();
    Dataset::new(samples, classes, shape)
}
