//! Domain types for first-order sequence labeling.
//!
//! All arc-indexed tensors share one layout: slice `i` (0-based, `i < n - 1`)
//! holds the `|T| x |T|` block of transitions from position `i` to `i + 1`,
//! row-major in `(from, to)`.

mod enumerate;
mod mask;
mod polytope;
mod trellis;

pub use enumerate::{enumerate_sequences, sequence_count, ENUMERATION_LIMIT};
pub use mask::{apply_mask, TransitionMask};
pub use polytope::{check_polytope_membership, is_vertex, PolytopeReport};
pub use trellis::{live_arcs, validate_reachability, Arc, ArcSupport, Node, Reachability, TrellisGraph};

use std::fmt;

use crate::error::{Error, Result};
use crate::logspace::{self, NEG_INF};

/// Sequence length and tag count of one labeling problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProblemShape {
    len: usize,
    num_tags: usize,
}

impl ProblemShape {
    pub const MIN_LEN: usize = 3;

    pub fn new(len: usize, num_tags: usize) -> Result<Self> {
        if len < Self::MIN_LEN {
            return Err(Error::SequenceTooShort(len));
        }
        if num_tags == 0 {
            return Err(Error::NoTags);
        }
        Ok(Self { len, num_tags })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn num_tags(&self) -> usize {
        self.num_tags
    }

    /// Number of transition slices, `n - 1`.
    #[inline]
    pub fn num_slices(&self) -> usize {
        self.len - 1
    }

    #[inline]
    pub fn slice_len(&self) -> usize {
        self.num_tags * self.num_tags
    }

    #[inline]
    pub fn num_arcs(&self) -> usize {
        self.num_slices() * self.slice_len()
    }

    #[inline]
    pub fn index(&self, slice: usize, from: usize, to: usize) -> usize {
        debug_assert!(slice < self.num_slices() && from < self.num_tags && to < self.num_tags);
        (slice * self.num_tags + from) * self.num_tags + to
    }

    /// Inverse of [`ProblemShape::index`].
    #[inline]
    pub fn unindex(&self, index: usize) -> (usize, usize, usize) {
        let t = self.num_tags;
        (index / (t * t), (index / t) % t, index % t)
    }

    fn check_same(&self, other: &ProblemShape) -> Result<()> {
        if self != other {
            return Err(Error::ShapeMismatch {
                expected: self.to_string(),
                found: other.to_string(),
            });
        }
        Ok(())
    }

    fn check_len(&self, found: usize) -> Result<()> {
        if found != self.num_arcs() {
            return Err(Error::WrongLength {
                expected: self.num_arcs(),
                found,
            });
        }
        Ok(())
    }
}

impl fmt::Display for ProblemShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(n={}, tags={})", self.len, self.num_tags)
    }
}

/// Canonical transition scores `w[i, t, t']`. `-inf` marks a forbidden arc.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor {
    shape: ProblemShape,
    values: Vec<f64>,
}

impl WeightTensor {
    pub fn new(shape: ProblemShape, values: Vec<f64>) -> Result<Self> {
        shape.check_len(values.len())?;
        if let Some(index) = values.iter().position(|&v| !logspace::is_admissible(v)) {
            return Err(Error::InvalidWeight {
                index,
                value: values[index],
            });
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: ProblemShape) -> Self {
        Self {
            shape,
            values: vec![0.0; shape.num_arcs()],
        }
    }

    pub fn from_fn(shape: ProblemShape, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let values = (0..shape.num_arcs())
            .map(|idx| {
                let (i, t, u) = shape.unindex(idx);
                f(i, t, u)
            })
            .collect();
        Self::new(shape, values)
    }

    #[inline]
    pub fn shape(&self) -> ProblemShape {
        self.shape
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, slice: usize, from: usize, to: usize) -> f64 {
        self.values[self.shape.index(slice, from, to)]
    }

    /// The `|T| x |T|` block of transitions leaving position `slice`.
    #[inline]
    pub fn slice(&self, slice: usize) -> &[f64] {
        let len = self.shape.slice_len();
        &self.values[slice * len..(slice + 1) * len]
    }

    /// Copy with a single entry replaced.
    pub fn with_value(&self, index: usize, value: f64) -> Result<Self> {
        let mut values = self.values.clone();
        values[index] = value;
        Self::new(self.shape, values)
    }

    /// `factor * w`, keeping `-inf` entries at `-inf`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "scale factor must be finite and positive, got {factor}"
            )));
        }
        let values = self.values.iter().map(|&v| v * factor).collect();
        Self::new(self.shape, values)
    }

    pub fn has_forbidden(&self) -> bool {
        self.values.contains(&NEG_INF)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// A labeling `x_1 .. x_n` as tag indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TagSequence {
    tags: Vec<usize>,
}

impl TagSequence {
    pub fn new(tags: Vec<usize>) -> Self {
        Self { tags }
    }

    pub fn tags(&self) -> &[usize] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn validate(&self, shape: ProblemShape) -> Result<()> {
        if self.tags.len() != shape.len() {
            return Err(Error::ShapeMismatch {
                expected: shape.to_string(),
                found: format!("sequence of length {}", self.tags.len()),
            });
        }
        if let Some((position, &tag)) = self
            .tags
            .iter()
            .enumerate()
            .find(|(_, &t)| t >= shape.num_tags())
        {
            return Err(Error::TagOutOfRange {
                position,
                tag,
                num_tags: shape.num_tags(),
            });
        }
        Ok(())
    }

    /// Arc indices used by this sequence, one per slice.
    pub fn arcs(&self, shape: ProblemShape) -> impl Iterator<Item = usize> + '_ {
        self.tags
            .windows(2)
            .enumerate()
            .map(move |(i, pair)| shape.index(i, pair[0], pair[1]))
    }

    pub fn into_tags(self) -> Vec<usize> {
        self.tags
    }
}

impl From<Vec<usize>> for TagSequence {
    fn from(tags: Vec<usize>) -> Self {
        Self::new(tags)
    }
}

/// Binary transition indicator `phi(x)` of a single labeling.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    shape: ProblemShape,
    values: Vec<f64>,
}

impl SufficientStats {
    pub fn shape(&self) -> ProblemShape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Recovers the labeling. Always succeeds on values built by [`encode_sequence`].
    pub fn decode(&self) -> TagSequence {
        let shape = self.shape;
        let t = shape.num_tags();
        let mut tags = Vec::with_capacity(shape.len());
        for i in 0..shape.num_slices() {
            let pos = self
                .slice(i)
                .iter()
                .position(|&v| v == 1.0)
                .expect("one active arc per slice");
            if i == 0 {
                tags.push(pos / t);
            }
            tags.push(pos % t);
        }
        TagSequence::new(tags)
    }

    fn slice(&self, slice: usize) -> &[f64] {
        let len = self.shape.slice_len();
        &self.values[slice * len..(slice + 1) * len]
    }
}

/// `phi(x)`: a one in slice `i` at `(x_i, x_{i+1})`, zeros elsewhere.
pub fn encode_sequence(shape: ProblemShape, x: &TagSequence) -> Result<SufficientStats> {
    x.validate(shape)?;
    let mut values = vec![0.0; shape.num_arcs()];
    for arc in x.arcs(shape) {
        values[arc] = 1.0;
    }
    Ok(SufficientStats { shape, values })
}

/// `<w, y>`. `-inf` exactly when `y` uses a forbidden arc.
pub fn score(w: &WeightTensor, y: &SufficientStats) -> Result<f64> {
    w.shape.check_same(&y.shape)?;
    Ok(logspace::dot(&y.values, &w.values))
}

/// Path score of a labeling, summed arc by arc.
pub fn sequence_score(w: &WeightTensor, x: &TagSequence) -> Result<f64> {
    x.validate(w.shape)?;
    Ok(x.arcs(w.shape).map(|a| w.values[a]).sum())
}

/// Nonnegative arc values, typically transition marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTensor {
    shape: ProblemShape,
    values: Vec<f64>,
}

impl MarginalTensor {
    pub fn new(shape: ProblemShape, values: Vec<f64>) -> Result<Self> {
        shape.check_len(values.len())?;
        if let Some(index) = values.iter().position(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidWeight {
                index,
                value: values[index],
            });
        }
        Ok(Self { shape, values })
    }

    pub fn uniform(shape: ProblemShape) -> Self {
        let v = 1.0 / shape.slice_len() as f64;
        Self {
            shape,
            values: vec![v; shape.num_arcs()],
        }
    }

    #[inline]
    pub fn shape(&self) -> ProblemShape {
        self.shape
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, slice: usize, from: usize, to: usize) -> f64 {
        self.values[self.shape.index(slice, from, to)]
    }

    pub fn slice(&self, slice: usize) -> &[f64] {
        let len = self.shape.slice_len();
        &self.values[slice * len..(slice + 1) * len]
    }

    /// `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &MarginalTensor, lambda: f64) -> Result<Self> {
        self.shape.check_same(&other.shape)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        Self::new(self.shape, values)
    }

    /// Per-position tag marginals, `n x |T|`, read off the arc marginals.
    pub fn tag_marginals(&self) -> Vec<Vec<f64>> {
        let shape = self.shape;
        let t = shape.num_tags();
        let mut out = vec![vec![0.0; t]; shape.len()];
        for i in 0..shape.num_slices() {
            let block = self.slice(i);
            for from in 0..t {
                out[i][from] = block[from * t..(from + 1) * t].iter().sum();
            }
            if i + 1 == shape.num_slices() {
                for to in 0..t {
                    out[i + 1][to] = (0..t).map(|from| block[from * t + to]).sum();
                }
            }
        }
        out
    }

    /// `<q, w>` with `0 * -inf = 0`.
    pub fn dot(&self, w: &WeightTensor) -> Result<f64> {
        self.shape.check_same(&w.shape)?;
        Ok(logspace::dot(&self.values, &w.values))
    }

    pub fn entropy(&self) -> f64 {
        logspace::entropy(&self.values)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl From<SufficientStats> for MarginalTensor {
    fn from(y: SufficientStats) -> Self {
        Self {
            shape: y.shape,
            values: y.values,
        }
    }
}

impl From<&SufficientStats> for MarginalTensor {
    fn from(y: &SufficientStats) -> Self {
        y.clone().into()
    }
}

/// Lowest-index argmax. Returns `None` on empty input.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ if v.is_nan() => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(n: usize, t: usize) -> ProblemShape {
        ProblemShape::new(n, t).unwrap()
    }

    #[test]
    fn rejects_short_sequences() {
        assert_eq!(ProblemShape::new(2, 3), Err(Error::SequenceTooShort(2)));
        assert_eq!(ProblemShape::new(3, 0), Err(Error::NoTags));
    }

    #[test]
    fn index_roundtrip() {
        let s = shape(5, 3);
        for idx in 0..s.num_arcs() {
            let (i, t, u) = s.unindex(idx);
            assert_eq!(s.index(i, t, u), idx);
        }
    }

    #[test]
    fn weights_reject_nan_and_pos_inf() {
        let s = shape(3, 1);
        assert!(WeightTensor::new(s, vec![0.0, f64::NAN]).is_err());
        assert!(WeightTensor::new(s, vec![0.0, f64::INFINITY]).is_err());
        assert!(WeightTensor::new(s, vec![0.0, NEG_INF]).is_ok());
        assert!(WeightTensor::new(s, vec![0.0]).is_err());
    }

    #[test]
    fn encode_small_sequence() {
        let s = shape(3, 2);
        let y = encode_sequence(s, &vec![0, 1, 0].into()).unwrap();
        let ones: Vec<usize> = (0..s.num_arcs()).filter(|&a| y.values()[a] == 1.0).collect();
        assert_eq!(ones, vec![s.index(0, 0, 1), s.index(1, 1, 0)]);
        assert_eq!(y.decode().tags(), &[0, 1, 0]);
    }

    #[test]
    fn encode_single_tag_is_all_ones() {
        let s = shape(3, 1);
        let y = encode_sequence(s, &vec![0, 0, 0].into()).unwrap();
        assert_eq!(y.values(), &[1.0, 1.0]);
    }

    #[test]
    fn encode_rejects_bad_sequences() {
        let s = shape(3, 2);
        assert!(encode_sequence(s, &vec![0, 2, 0].into()).is_err());
        assert!(encode_sequence(s, &vec![0, 1].into()).is_err());
    }

    #[test]
    fn score_of_zeros_and_self() {
        let s = shape(4, 2);
        let x: TagSequence = vec![1, 0, 0, 1].into();
        let y = encode_sequence(s, &x).unwrap();
        assert_eq!(score(&WeightTensor::zeros(s), &y).unwrap(), 0.0);
        let w = WeightTensor::new(s, y.values().to_vec()).unwrap();
        assert_eq!(score(&w, &y).unwrap(), 3.0);
    }

    #[test]
    fn score_is_neg_inf_on_forbidden_arc() {
        let s = shape(3, 2);
        let w = WeightTensor::zeros(s).with_value(s.index(0, 0, 1), NEG_INF).unwrap();
        let y = encode_sequence(s, &vec![0, 1, 1].into()).unwrap();
        assert_eq!(score(&w, &y).unwrap(), NEG_INF);
        let z = encode_sequence(s, &vec![0, 0, 1].into()).unwrap();
        assert_eq!(score(&w, &z).unwrap(), 0.0);
    }

    #[test]
    fn score_shape_mismatch() {
        let y = encode_sequence(shape(3, 2), &vec![0, 0, 0].into()).unwrap();
        assert!(score(&WeightTensor::zeros(shape(4, 2)), &y).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[3.0, 1.0, 3.0]), Some(0));
        assert_eq!(argmax(&[NEG_INF, NEG_INF, -1.0]), Some(2));
        assert_eq!(argmax(&[]), None);
    }

    #[test]
    fn tag_marginals_of_vertex() {
        let s = shape(4, 3);
        let q: MarginalTensor = encode_sequence(s, &vec![2, 0, 1, 1].into()).unwrap().into();
        let m = q.tag_marginals();
        assert_eq!(m[0], vec![0.0, 0.0, 1.0]);
        assert_eq!(m[1], vec![1.0, 0.0, 0.0]);
        assert_eq!(m[3], vec![0.0, 1.0, 0.0]);
    }
}
