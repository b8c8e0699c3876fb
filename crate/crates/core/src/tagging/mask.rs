use super::trellis::validate_reachability;
use super::{ProblemShape, TagSequence, WeightTensor};
use crate::error::{Error, Result};
use crate::logspace::NEG_INF;

/// Per-arc allowed flags describing a set of labelings.
///
/// Construction fails unless at least one complete allowed path exists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionMask {
    shape: ProblemShape,
    allowed: Vec<bool>,
}

impl TransitionMask {
    pub fn new(shape: ProblemShape, allowed: Vec<bool>) -> Result<Self> {
        if allowed.len() != shape.num_arcs() {
            return Err(Error::WrongLength {
                expected: shape.num_arcs(),
                found: allowed.len(),
            });
        }
        let mask = Self { shape, allowed };
        let r = validate_reachability(&mask);
        if !r.reachable {
            return Err(Error::Unreachable(r.diagnostic));
        }
        Ok(mask)
    }

    pub fn all_allowed(shape: ProblemShape) -> Self {
        Self {
            shape,
            allowed: vec![true; shape.num_arcs()],
        }
    }

    pub fn from_fn(shape: ProblemShape, mut f: impl FnMut(usize, usize, usize) -> bool) -> Result<Self> {
        let allowed = (0..shape.num_arcs())
            .map(|a| {
                let (i, t, u) = shape.unindex(a);
                f(i, t, u)
            })
            .collect();
        Self::new(shape, allowed)
    }

    /// Only the arcs of `x` are allowed.
    pub fn singleton(shape: ProblemShape, x: &TagSequence) -> Result<Self> {
        x.validate(shape)?;
        let mut allowed = vec![false; shape.num_arcs()];
        for a in x.arcs(shape) {
            allowed[a] = true;
        }
        Ok(Self { shape, allowed })
    }

    /// Arc `(i, t, t')` is allowed iff `t` is allowed at `i` and `t'` at `i + 1`.
    pub fn from_allowed_tags(shape: ProblemShape, per_position: &[Vec<bool>]) -> Result<Self> {
        if per_position.len() != shape.len() || per_position.iter().any(|p| p.len() != shape.num_tags()) {
            return Err(Error::ShapeMismatch {
                expected: shape.to_string(),
                found: format!("{} allowed-tag rows", per_position.len()),
            });
        }
        Self::from_fn(shape, |i, t, u| per_position[i][t] && per_position[i + 1][u])
    }

    pub fn shape(&self) -> ProblemShape {
        self.shape
    }

    pub fn allowed(&self) -> &[bool] {
        &self.allowed
    }

    pub fn is_allowed(&self, slice: usize, from: usize, to: usize) -> bool {
        self.allowed[self.shape.index(slice, from, to)]
    }

    /// Whether every arc of `x` is allowed.
    pub fn contains(&self, x: &TagSequence) -> bool {
        x.validate(self.shape).is_ok() && x.arcs(self.shape).all(|a| self.allowed[a])
    }

    pub fn intersect(&self, other: &TransitionMask) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape.to_string(),
                found: other.shape.to_string(),
            });
        }
        let allowed = self.allowed.iter().zip(&other.allowed).map(|(&a, &b)| a && b).collect();
        Self::new(self.shape, allowed)
    }

    pub fn is_subset_of(&self, other: &TransitionMask) -> bool {
        self.shape == other.shape && self.allowed.iter().zip(&other.allowed).all(|(&a, &b)| !a || b)
    }

    /// `0` on allowed arcs, `-inf` elsewhere.
    pub fn to_weights(&self) -> WeightTensor {
        let values = self.allowed.iter().map(|&a| if a { 0.0 } else { NEG_INF }).collect();
        WeightTensor::new(self.shape, values).expect("0 and -inf are admissible")
    }
}

/// `w` where the mask allows, `-inf` where it forbids.
pub fn apply_mask(w: &WeightTensor, mask: &TransitionMask) -> Result<WeightTensor> {
    if w.shape() != mask.shape() {
        return Err(Error::ShapeMismatch {
            expected: w.shape().to_string(),
            found: mask.shape().to_string(),
        });
    }
    let values = w
        .values()
        .iter()
        .zip(mask.allowed())
        .map(|(&v, &a)| if a { v } else { NEG_INF })
        .collect();
    let masked = WeightTensor::new(w.shape(), values)?;
    let r = validate_reachability(&masked);
    if !r.reachable {
        return Err(Error::Unreachable(r.diagnostic));
    }
    Ok(masked)
}
