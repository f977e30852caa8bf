//! Entropy-based pruning and weighted averaging of class posteriors.
//!
//! Entropies use the natural logarithm. Ties are broken by schedule index,
//! then by class index.

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::Posterior;

#[derive(Debug, Error)]
pub enum MarginalError {
    #[error("Rényi order alpha = 1 is the Shannon limit; use shannon_entropy")]
    AlphaIsOne,
    #[error("Rényi order must be positive, got {0}")]
    AlphaNotPositive(f64),
    #[error("nothing to marginalize")]
    Empty,
    #[error("posteriors disagree on class count ({0} vs {1})")]
    ClassCount(usize, usize),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyScore {
    pub value: f64,
    /// `None` for Shannon entropy.
    pub alpha: Option<f64>,
}

/// `H_alpha(v) = log(sum v_i^alpha) / (1 - alpha)`; zero entries contribute 0.
pub fn renyi_entropy(v: &Posterior, alpha: f64) -> Result<EntropyScore, MarginalError> {
    if alpha == 1.0 {
        return Err(MarginalError::AlphaIsOne);
    }
    if !(alpha > 0.0) {
        return Err(MarginalError::AlphaNotPositive(alpha));
    }
    let s: f64 = v.probs().iter().filter(|&&p| p > 0.0).map(|&p| p.powf(alpha)).sum();
    // rounding can push a one-hot or uniform result a hair outside [0, log C]
    let value = (s.ln() / (1.0 - alpha)).clamp(0.0, (v.class_count() as f64).ln());
    Ok(EntropyScore { value, alpha: Some(alpha) })
}

/// `-sum v_i log v_i` with `0 log 0 = 0`.
pub fn shannon_entropy(v: &Posterior) -> EntropyScore {
    let h: f64 = v.probs().iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
    EntropyScore { value: h.clamp(0.0, (v.class_count() as f64).ln()), alpha: None }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    LowestEntropy,
    Random,
    LargestSize,
    MaxConfidence,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::LowestEntropy => "lowest_entropy",
            Strategy::Random => "random",
            Strategy::LargestSize => "largest_size",
            Strategy::MaxConfidence => "max_confidence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub strategy: Strategy,
    /// Number of candidates to keep (`E`).
    pub keep: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { strategy: Strategy::LowestEntropy, keep: 12, alpha: 0.35, seed: 0 }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), MarginalError> {
        if self.keep == 0 {
            return Err(MarginalError::Invalid("selection must keep at least one sample".into()));
        }
        if !(self.alpha > 0.0) || self.alpha == 1.0 {
            return Err(MarginalError::Invalid(format!("alpha must be positive and != 1, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// A selectable candidate: its posterior and its box area.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub posterior: &'a Posterior,
    pub area: f64,
}

/// Indices of the `min(keep, n)` candidates chosen by `cfg.strategy`,
/// returned in ascending index order.
pub fn select(candidates: &[Candidate<'_>], cfg: &SelectionConfig) -> Result<Vec<usize>, MarginalError> {
    cfg.validate()?;
    let n = candidates.len();
    if cfg.keep >= n {
        return Ok((0..n).collect());
    }
    let mut chosen: Vec<usize> = match cfg.strategy {
        Strategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rand::seq::index::sample(&mut rng, n, cfg.keep).into_vec()
        }
        strategy => {
            let keys: Vec<f64> = candidates
                .iter()
                .map(|c| {
                    Ok(match strategy {
                        Strategy::LowestEntropy => renyi_entropy(c.posterior, cfg.alpha)?.value,
                        Strategy::MaxConfidence => -c.posterior.max_prob(),
                        Strategy::LargestSize => -c.area,
                        Strategy::Random => unreachable!(),
                    })
                })
                .collect::<Result<_, MarginalError>>()?;
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
            order.truncate(cfg.keep);
            order
        }
    };
    chosen.sort_unstable();
    Ok(chosen)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    Uniform,
    InverseEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightingConfig {
    pub mode: WeightMode,
    /// Floor on the entropy before inversion.
    pub epsilon: f64,
    /// Rényi order used for the inverse-entropy weights.
    pub alpha: f64,
}

impl Default for WeightingConfig {
    fn default() -> Self {
        Self { mode: WeightMode::Uniform, epsilon: 1e-6, alpha: 0.35 }
    }
}

/// Normalized weights `w_r ∝ 1 / max(H_r, epsilon)`.
pub fn inverse_entropy_weights(entropies: &[f64], epsilon: f64) -> Vec<f64> {
    let inv: Vec<f64> = entropies.iter().map(|&h| 1.0 / h.max(epsilon)).collect();
    // summed in sorted order so the weights do not depend on input order
    let mut sorted = inv.clone();
    sorted.sort_by(f64::total_cmp);
    let total: f64 = sorted.iter().sum();
    inv.into_iter().map(|w| w / total).collect()
}

fn cmp_probs(a: &Posterior, b: &Posterior) -> Ordering {
    a.probs()
        .iter()
        .zip(b.probs())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Weighted average of posteriors with explicit weights. Terms are
/// accumulated in a canonical order (lexicographic on the probability
/// vectors) so the result does not depend on input order.
pub fn weighted_average(posteriors: &[&Posterior], weights: &[f64]) -> Result<Posterior, MarginalError> {
    let first = posteriors.first().ok_or(MarginalError::Empty)?;
    let classes = first.class_count();
    if let Some(p) = posteriors.iter().find(|p| p.class_count() != classes) {
        return Err(MarginalError::ClassCount(classes, p.class_count()));
    }
    if weights.len() != posteriors.len() {
        return Err(MarginalError::Invalid(format!("{} weights for {} posteriors", weights.len(), posteriors.len())));
    }
    let mut order: Vec<usize> = (0..posteriors.len()).collect();
    order.sort_by(|&a, &b| cmp_probs(posteriors[a], posteriors[b]).then(weights[a].total_cmp(&weights[b])));
    let mut acc = vec![0.0; classes];
    let mut total = 0.0;
    for &i in &order {
        let w = weights[i];
        total += w;
        for (a, &p) in acc.iter_mut().zip(posteriors[i].probs()) {
            *a += w * p;
        }
    }
    if !(total > 0.0) {
        return Err(MarginalError::Invalid("weights sum to zero".into()));
    }
    for a in &mut acc {
        *a /= total;
    }
    let sum: f64 = acc.iter().sum();
    for a in &mut acc {
        *a /= sum;
    }
    Posterior::new(acc).map_err(|e| MarginalError::Invalid(e.to_string()))
}

/// Per-sample weights for `posteriors` under `cfg`.
pub fn marginal_weights(posteriors: &[&Posterior], cfg: &WeightingConfig) -> Result<Vec<f64>, MarginalError> {
    if !(cfg.epsilon > 0.0) {
        return Err(MarginalError::Invalid(format!("epsilon must be positive, got {}", cfg.epsilon)));
    }
    match cfg.mode {
        WeightMode::Uniform => Ok(vec![1.0 / posteriors.len() as f64; posteriors.len()]),
        WeightMode::InverseEntropy => {
            let h = posteriors.iter().map(|p| renyi_entropy(p, cfg.alpha).map(|e| e.value)).collect::<Result<Vec<_>, _>>()?;
            Ok(inverse_entropy_weights(&h, cfg.epsilon))
        }
    }
}

/// Approximate marginal `sum_r p(c | x_r) w_r`.
pub fn marginalize(posteriors: &[&Posterior], cfg: &WeightingConfig) -> Result<Posterior, MarginalError> {
    if posteriors.is_empty() {
        return Err(MarginalError::Empty);
    }
    let w = marginal_weights(posteriors, cfg)?;
    weighted_average(posteriors, &w)
}

/// The `k` most probable classes, ties by class index.
pub fn top_k_predict(v: &Posterior, k: usize) -> Vec<usize> {
    let p = v.probs();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Fraction of items whose label is missing from its top-`k` prediction.
pub fn top_k_error(predictions: &[Vec<usize>], labels: &[usize], k: usize) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let misses = predictions
        .iter()
        .zip(labels)
        .filter(|(pred, label)| !pred.iter().take(k).any(|c| c == *label))
        .count();
    misses as f64 / labels.len() as f64
}

/// Evaluation and averaging counts for a composite schedule.
///
/// `crops` and `sizes` are per-protocol sample counts (flips already
/// included, e.g. 10 for corners + centre with flips); proposals are
/// evaluated (and mirrored when `flips`) only when `keep > 0`.
pub fn schedule_accounting(crops: usize, scales: usize, sizes: usize, keep: usize, proposals: usize, flips: bool) -> (usize, usize) {
    let regular = crops * scales + sizes;
    let evaluated = if keep > 0 { proposals * if flips { 2 } else { 1 } } else { 0 };
    (regular + evaluated, regular + keep)
}
