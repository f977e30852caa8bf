//! Class posteriors for region samples: a small direct-convolution engine,
//! an adapter for external classifiers over a line-delimited JSON protocol,
//! and the batched evaluator that materializes schedules.

mod batch;
mod external;
mod format;
mod network;

pub use batch::{batch_eval, materialize, EvalBatch};
pub use external::ExternalClassifier;
pub use format::{load_network, save_network};
pub use network::{InputDims, Layer, LayerKind, NetworkSpec};

use thiserror::Error;

use crate::imagegeom::{GeomError, Image};

/// Tolerance on the probability sum of a [`Posterior`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("layer {layer}: {msg}")]
    Dimension { layer: String, msg: String },
    #[error("layer {layer}: weight blob {msg}")]
    Blob { layer: String, msg: String },
    #[error("network manifest: {0}")]
    Manifest(String),
    #[error("network must end with a single softmax layer")]
    MissingSoftmax,
    #[error("input is {got:?}, network expects {expected:?}")]
    InputMismatch { expected: (usize, usize, usize), got: (usize, usize, usize) },
    #[error("posterior has {got} classes, expected {expected}")]
    Arity { expected: usize, got: usize },
    #[error("posterior is not on the simplex: {0}")]
    Simplex(String),
    #[error("malformed classifier response: {0}")]
    Malformed(String),
    #[error("classifier did not answer within {0:?}")]
    Timeout(std::time::Duration),
    #[error("classifier process: {0}")]
    Process(String),
    #[error("batch size must be at least 1")]
    BatchSize,
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A point on the class probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    probs: Vec<f64>,
}

impl Posterior {
    /// Validates entries in `[0, 1]` summing to 1 within [`SIMPLEX_TOLERANCE`].
    pub fn new(probs: Vec<f64>) -> Result<Self, InferenceError> {
        if probs.is_empty() {
            return Err(InferenceError::Simplex("empty probability vector".into()));
        }
        if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(InferenceError::Simplex(format!("entry {i} = {p} outside [0, 1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(InferenceError::Simplex(format!("entries sum to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Softmax with max subtraction.
    pub fn from_logits(logits: &[f64]) -> Self {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        Self { probs: exps.into_iter().map(|e| e / total).collect() }
    }

    pub fn uniform(classes: usize) -> Self {
        Self { probs: vec![1.0 / classes as f64; classes] }
    }

    pub fn one_hot(classes: usize, class: usize) -> Self {
        let mut probs = vec![0.0; classes];
        probs[class] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn class_count(&self) -> usize {
        self.probs.len()
    }

    pub fn max_prob(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }

    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        Self { probs }
    }
}

/// Anything that maps classifier-sized images to class posteriors.
pub trait Classifier: Send + Sync {
    fn input_dims(&self) -> InputDims;

    fn class_count(&self) -> usize;

    /// Classifies every image; output order matches input order.
    fn classify_batch(&self, batch: &[Image]) -> Result<Vec<Posterior>, InferenceError>;
}
