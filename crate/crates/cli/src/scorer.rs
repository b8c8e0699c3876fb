//! Linear emission + transition scorer.
//!
//! Scores are folded into the arc weights: slice `i` carries the transition
//! score plus the emission of the token at position `i + 1` for the target
//! tag, and slice 0 also carries the first token's emission for the source tag.

use bcrf_core::logspace::NEG_INF;
use bcrf_core::tagging::{ProblemShape, TransitionMask, WeightTensor};
use serde::{Deserialize, Serialize};

use crate::data::{Record, Vocab, BOS_TAG};
use crate::error::{CliError, Result};

/// Hard constraints on which tags may follow each other, start, or end a sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralMask {
    pub num_tags: usize,
    /// Row-major `from * num_tags + to`.
    pub transitions: Vec<bool>,
    pub start: Vec<bool>,
    pub end: Vec<bool>,
}

impl StructuralMask {
    pub fn allow_all(num_tags: usize) -> Self {
        Self {
            num_tags,
            transitions: vec![true; num_tags * num_tags],
            start: vec![true; num_tags],
            end: vec![true; num_tags],
        }
    }

    /// BIES constraints from tag names `B-x`, `I-x`, `E-x`, `S-x`.
    ///
    /// The boundary tag, if present, is left unconstrained here.
    pub fn bies(tags: &Vocab) -> Result<Self> {
        let t = tags.len();
        let parsed: Vec<Option<(char, &str)>> = tags
            .items()
            .iter()
            .map(|name| {
                if name == BOS_TAG {
                    return Ok(None);
                }
                let (prefix, kind) = name
                    .split_once('-')
                    .ok_or_else(|| CliError::Conflict(format!("tag `{name}` is not of the form B-x/I-x/E-x/S-x")))?;
                match prefix {
                    "B" | "I" | "E" | "S" => Ok(Some((prefix.chars().next().unwrap(), kind))),
                    _ => Err(CliError::Conflict(format!("tag `{name}` has no BIES prefix"))),
                }
            })
            .collect::<Result<_>>()?;
        let mut m = Self::allow_all(t);
        for (a, pa) in parsed.iter().enumerate() {
            let Some((ra, ka)) = pa else { continue };
            m.start[a] = matches!(ra, 'B' | 'S');
            m.end[a] = matches!(ra, 'E' | 'S');
            for (b, pb) in parsed.iter().enumerate() {
                let Some((rb, kb)) = pb else { continue };
                let inside = matches!(ra, 'B' | 'I');
                m.transitions[a * t + b] = if inside {
                    matches!(rb, 'I' | 'E') && ka == kb
                } else {
                    matches!(rb, 'B' | 'S')
                };
            }
        }
        Ok(m)
    }

    pub fn is_trivial(&self) -> bool {
        self.transitions.iter().chain(&self.start).chain(&self.end).all(|&b| b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearScorer {
    pub num_tags: usize,
    pub vocab_size: usize,
    /// Row-major `token * num_tags + tag`.
    pub emissions: Vec<f64>,
    /// Row-major `from * num_tags + to`.
    pub transitions: Vec<f64>,
    pub mask: Option<StructuralMask>,
    /// The reserved boundary tag, allowed only on padding positions.
    pub bos: Option<usize>,
}

/// A sentence as token ids, with its padding length.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSentence {
    pub ids: Vec<usize>,
    pub padding: usize,
}

impl EncodedSentence {
    pub fn new(record: &Record, tokens: &Vocab) -> Self {
        Self {
            ids: record.tokens.iter().map(|t| tokens.get(t).unwrap_or(0)).collect(),
            padding: record.padding,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Gradient with respect to the scorer's tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerGrad {
    pub emissions: Vec<f64>,
    pub transitions: Vec<f64>,
}

impl ScorerGrad {
    pub fn zeros(scorer: &LinearScorer) -> Self {
        Self {
            emissions: vec![0.0; scorer.emissions.len()],
            transitions: vec![0.0; scorer.transitions.len()],
        }
    }
}

impl LinearScorer {
    pub fn zeros(num_tags: usize, vocab_size: usize) -> Self {
        Self {
            num_tags,
            vocab_size,
            emissions: vec![0.0; vocab_size * num_tags],
            transitions: vec![0.0; num_tags * num_tags],
            mask: None,
            bos: None,
        }
    }

    pub fn with_mask(mut self, mask: StructuralMask) -> Self {
        self.mask = if mask.is_trivial() { None } else { Some(mask) };
        self
    }

    pub fn with_bos(mut self, bos: Option<usize>) -> Self {
        self.bos = bos;
        self
    }

    pub fn emission(&self, token: usize, tag: usize) -> f64 {
        self.emissions[token * self.num_tags + tag]
    }

    pub fn shape(&self, sentence: &EncodedSentence) -> Result<ProblemShape> {
        Ok(ProblemShape::new(sentence.len(), self.num_tags)?)
    }

    /// Whether scored sentences can contain forbidden arcs.
    pub fn has_constraints(&self) -> bool {
        self.mask.is_some() || self.bos.is_some()
    }

    /// Tags allowed at `position` by padding and start/end constraints.
    fn position_allows(&self, sentence: &EncodedSentence, position: usize, tag: usize) -> bool {
        if let Some(bos) = self.bos {
            if (position < sentence.padding) != (tag == bos) {
                return false;
            }
        }
        if let Some(m) = &self.mask {
            if position == sentence.padding && !m.start[tag] {
                return false;
            }
            if position + 1 == sentence.len() && !m.end[tag] {
                return false;
            }
        }
        true
    }

    fn transition_allows(&self, from: usize, to: usize) -> bool {
        if Some(from) == self.bos || Some(to) == self.bos {
            return true;
        }
        self.mask.as_ref().is_none_or(|m| m.transitions[from * self.num_tags + to])
    }

    /// Arc weights for one sentence, with structural constraints as `-inf`.
    pub fn score_sentence(&self, sentence: &EncodedSentence) -> Result<WeightTensor> {
        let shape = self.shape(sentence)?;
        let t = self.num_tags;
        let allowed: Vec<Vec<bool>> = (0..sentence.len())
            .map(|k| (0..t).map(|tag| self.position_allows(sentence, k, tag)).collect())
            .collect();
        let ids = &sentence.ids;
        let w = WeightTensor::from_fn(shape, |i, from, to| {
            if !(allowed[i][from] && allowed[i + 1][to] && self.transition_allows(from, to)) {
                return NEG_INF;
            }
            let mut v = self.transitions[from * t + to] + self.emission(ids[i + 1], to);
            if i == 0 {
                v += self.emission(ids[0], from);
            }
            v
        })?;
        Ok(w)
    }

    /// Adds the chain rule of an arc-space gradient into `grad`.
    pub fn accumulate(&self, sentence: &EncodedSentence, arc_grad: &[f64], scale: f64, grad: &mut ScorerGrad) {
        let t = self.num_tags;
        let ids = &sentence.ids;
        for (i, block) in arc_grad.chunks_exact(t * t).enumerate() {
            for from in 0..t {
                for to in 0..t {
                    let g = block[from * t + to] * scale;
                    if g == 0.0 {
                        continue;
                    }
                    grad.transitions[from * t + to] += g;
                    grad.emissions[ids[i + 1] * t + to] += g;
                    if i == 0 {
                        grad.emissions[ids[0] * t + from] += g;
                    }
                }
            }
        }
    }

    /// `params -= lr * grad`.
    pub fn step(&mut self, grad: &ScorerGrad, lr: f64) {
        for (p, g) in self.emissions.iter_mut().zip(&grad.emissions) {
            *p -= lr * g;
        }
        for (p, g) in self.transitions.iter_mut().zip(&grad.transitions) {
            *p -= lr * g;
        }
    }

    /// Per-position argmax of the emission scores alone.
    pub fn unstructured_decode(&self, sentence: &EncodedSentence) -> Vec<usize> {
        (0..sentence.len())
            .map(|k| {
                let mut best = None;
                for tag in 0..self.num_tags {
                    let is_bos = Some(tag) == self.bos;
                    if is_bos != (k < sentence.padding) {
                        continue;
                    }
                    let s = self.emission(sentence.ids[k], tag);
                    if best.is_none_or(|(_, b)| s > b) {
                        best = Some((tag, s));
                    }
                }
                best.map_or(0, |(tag, _)| tag)
            })
            .collect()
    }
}

/// Per-position allowed tags from a record's labels, as an arc mask.
pub fn label_mask(record: &Record, num_tags: usize) -> Result<TransitionMask> {
    let shape = ProblemShape::new(record.len(), num_tags)?;
    let allowed: Vec<Vec<bool>> = record
        .labels
        .iter()
        .map(|l| (0..num_tags).map(|t| l.allows(t)).collect())
        .collect();
    Ok(TransitionMask::from_allowed_tags(shape, &allowed)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_conll, TagPolicy};
    use bcrf_core::dp::viterbi;

    fn sentence(ids: Vec<usize>) -> EncodedSentence {
        EncodedSentence { ids, padding: 0 }
    }

    #[test]
    fn zero_tables_give_zero_weights() {
        let s = LinearScorer::zeros(3, 5);
        let w = s.score_sentence(&sentence(vec![1, 2, 3, 4])).unwrap();
        assert!(w.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn last_token_emission_touches_last_slice() {
        let mut s = LinearScorer::zeros(3, 5);
        s.emissions[4 * 3 + 2] = 1.5;
        let w = s.score_sentence(&sentence(vec![1, 2, 3, 4])).unwrap();
        for a in 0..w.values().len() {
            let (i, _, to) = w.shape().unindex(a);
            let expected = if i == 2 && to == 2 { 1.5 } else { 0.0 };
            assert_eq!(w.values()[a], expected);
        }
    }

    #[test]
    fn first_token_emission_on_source_tag() {
        let mut s = LinearScorer::zeros(2, 3);
        s.emissions[1 * 2 + 1] = -2.0;
        let w = s.score_sentence(&sentence(vec![1, 0, 0])).unwrap();
        assert_eq!(w.get(0, 1, 0), -2.0);
        assert_eq!(w.get(0, 0, 1), 0.0);
        assert_eq!(w.get(1, 1, 1), 0.0);
    }

    #[test]
    fn bies_mask() {
        let d = parse_conll("a\tB-X\nb\tE-X\nc\tS-Y\nd\tI-X\n", "t", TagPolicy::Grow).unwrap();
        let m = StructuralMask::bies(&d.tags).unwrap();
        let id = |n: &str| d.tags.get(n).unwrap();
        let t = d.tags.len();
        assert!(m.transitions[id("B-X") * t + id("E-X")]);
        assert!(m.transitions[id("B-X") * t + id("I-X")]);
        assert!(!m.transitions[id("B-X") * t + id("S-Y")]);
        assert!(m.transitions[id("E-X") * t + id("S-Y")]);
        assert!(!m.transitions[id("S-Y") * t + id("E-X")]);
        assert!(m.start[id("S-Y")] && !m.start[id("I-X")]);
        assert!(m.end[id("E-X")] && !m.end[id("B-X")]);
        let plain = parse_conll("a\tNOUN\nb\tX\nc\tX\n", "t", TagPolicy::Grow).unwrap();
        assert!(StructuralMask::bies(&plain.tags).is_err());
    }

    #[test]
    fn padding_forces_the_boundary_tag() {
        let d = parse_conll("a\tX\n\nb\tY\nc\tX\nd\tX\n", "t", TagPolicy::Grow).unwrap();
        let bos = d.bos_tag().unwrap();
        let scorer = LinearScorer::zeros(d.num_tags(), d.tokens.len()).with_bos(Some(bos));
        let enc = EncodedSentence::new(&d.records[0], &d.tokens);
        assert_eq!(enc.padding, 2);
        let w = scorer.score_sentence(&enc).unwrap();
        let (x, _) = viterbi(&w).unwrap();
        assert_eq!(&x.tags()[..2], &[bos, bos]);
        assert_ne!(x.tags()[2], bos);
        let enc = EncodedSentence::new(&d.records[1], &d.tokens);
        let (x, _) = viterbi(&scorer.score_sentence(&enc).unwrap()).unwrap();
        assert!(x.tags().iter().all(|&t| t != bos));
    }

    #[test]
    fn gradient_accumulation_matches_folding() {
        // d<w, g>/d(table) computed by perturbing each table entry
        let mut s = LinearScorer::zeros(3, 4);
        for (k, e) in s.emissions.iter_mut().enumerate() {
            *e = (k as f64 * 0.37).sin();
        }
        for (k, a) in s.transitions.iter_mut().enumerate() {
            *a = (k as f64 * 0.71).cos();
        }
        let sent = sentence(vec![2, 0, 3, 3, 1]);
        let g: Vec<f64> = (0..4 * 9).map(|k| ((k * 7) % 5) as f64 - 2.0).collect();
        let mut grad = ScorerGrad::zeros(&s);
        s.accumulate(&sent, &g, 1.0, &mut grad);
        let f = |sc: &LinearScorer| -> f64 {
            sc.score_sentence(&sent).unwrap().values().iter().zip(&g).map(|(w, g)| w * g).sum()
        };
        let base = f(&s);
        for k in 0..s.emissions.len() {
            let mut p = s.clone();
            p.emissions[k] += 1.0;
            assert!((f(&p) - base - grad.emissions[k]).abs() < 1e-9);
        }
        for k in 0..s.transitions.len() {
            let mut p = s.clone();
            p.transitions[k] += 1.0;
            assert!((f(&p) - base - grad.transitions[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn unknown_tokens_map_to_unk() {
        let d = parse_conll("a\tX\nb\tX\nc\tX\n", "t", TagPolicy::Grow).unwrap();
        let other = parse_conll("a\tX\nzzz\tX\nc\tX\n", "t", TagPolicy::Grow).unwrap();
        let enc = EncodedSentence::new(&other.records[0], &d.tokens);
        assert_eq!(enc.ids[1], 0);
    }
}
