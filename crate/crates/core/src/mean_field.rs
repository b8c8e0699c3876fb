//! Naive mean field: a product of per-position tag distributions refined by
//! parallel (Jacobi) message updates.
//!
//! The updates only see expected scores, so forbidden transitions (`-inf`)
//! cannot be represented; such weights are rejected.

use crate::error::{Error, Result};
use crate::logspace::{self, NEG_INF};
use crate::tagging::{argmax, TagSequence, WeightTensor};

/// Per-position distributions `r_i` over tags.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedDistribution {
    probs: Vec<Vec<f64>>,
}

impl FactorizedDistribution {
    pub fn uniform(len: usize, num_tags: usize) -> Self {
        Self {
            probs: vec![vec![1.0 / num_tags as f64; num_tags]; len],
        }
    }

    /// Each row must be nonnegative and sum to one within `1e-12`.
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        for (i, row) in probs.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidConfig(format!("row {i} is not a distribution")));
            }
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Lowest-index argmax per position.
    pub fn argmax(&self) -> TagSequence {
        TagSequence::new(self.probs.iter().map(|r| argmax(r).expect("non-empty tag set")).collect())
    }

    /// Largest absolute difference to another distribution of the same size.
    pub fn max_change(&self, other: &FactorizedDistribution) -> f64 {
        self.probs
            .iter()
            .flatten()
            .zip(other.probs.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn ensure_finite(w: &WeightTensor) -> Result<()> {
    match w.values().iter().position(|&v| v == NEG_INF) {
        Some(index) => Err(Error::ForbiddenInMeanField { index }),
        None => Ok(()),
    }
}

fn check_dims(r: &FactorizedDistribution, w: &WeightTensor) -> Result<()> {
    let shape = w.shape();
    if r.len() != shape.len() || r.probs.iter().any(|row| row.len() != shape.num_tags()) {
        return Err(Error::ShapeMismatch {
            expected: shape.to_string(),
            found: format!("factorized distribution over {} positions", r.len()),
        });
    }
    Ok(())
}

fn update_unchecked(r: &FactorizedDistribution, w: &WeightTensor) -> FactorizedDistribution {
    let shape = w.shape();
    let t = shape.num_tags();
    let n = shape.len();
    let probs = (0..n)
        .map(|i| {
            let mut m = vec![0.0; t];
            if i > 0 {
                let block = w.slice(i - 1);
                for (tag, mt) in m.iter_mut().enumerate() {
                    *mt += (0..t).map(|from| r.probs[i - 1][from] * block[from * t + tag]).sum::<f64>();
                }
            }
            if i + 1 < n {
                let block = w.slice(i);
                for (tag, mt) in m.iter_mut().enumerate() {
                    *mt += (0..t).map(|to| r.probs[i + 1][to] * block[tag * t + to]).sum::<f64>();
                }
            }
            let log_norm = logspace::logsumexp(&m);
            m.iter().map(|&x| (x - log_norm).exp()).collect()
        })
        .collect();
    FactorizedDistribution { probs }
}

/// One simultaneous update of every position from the previous `r`.
pub fn mf_update(r: &FactorizedDistribution, w: &WeightTensor) -> Result<FactorizedDistribution> {
    ensure_finite(w)?;
    check_dims(r, w)?;
    Ok(update_unchecked(r, w))
}

/// `iters` parallel updates from `init`. No convergence is implied.
pub fn mf_infer(w: &WeightTensor, iters: usize, init: FactorizedDistribution) -> Result<FactorizedDistribution> {
    ensure_finite(w)?;
    check_dims(&init, w)?;
    let mut r = init;
    for _ in 0..iters {
        r = update_unchecked(&r, w);
    }
    Ok(r)
}

/// Argmax readout after `iters` updates from the uniform distribution.
pub fn mf_decode(w: &WeightTensor, iters: usize) -> Result<TagSequence> {
    let shape = w.shape();
    let r = mf_infer(w, iters, FactorizedDistribution::uniform(shape.len(), shape.num_tags()))?;
    Ok(r.argmax())
}
