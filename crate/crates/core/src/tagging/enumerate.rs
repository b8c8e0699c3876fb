use super::{ProblemShape, TagSequence, TransitionMask};
use crate::error::{Error, Result};

/// Largest `|T|^n` that exhaustive enumeration accepts.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// `|T|^n`, saturating.
pub fn sequence_count(shape: ProblemShape) -> u128 {
    (shape.num_tags() as u128)
        .checked_pow(shape.len() as u32)
        .unwrap_or(u128::MAX)
}

/// All labelings allowed by `mask` (all labelings without one), in
/// lexicographic order.
pub fn enumerate_sequences(shape: ProblemShape, mask: Option<&TransitionMask>) -> Result<Vec<TagSequence>> {
    let count = sequence_count(shape);
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    if let Some(m) = mask {
        if m.shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape.to_string(),
                found: m.shape().to_string(),
            });
        }
    }
    let allowed = |i: usize, t: usize, u: usize| mask.is_none_or(|m| m.is_allowed(i, t, u));

    let n = shape.len();
    let num_tags = shape.num_tags();
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(n);
    fn extend(
        prefix: &mut Vec<usize>,
        n: usize,
        num_tags: usize,
        allowed: &dyn Fn(usize, usize, usize) -> bool,
        out: &mut Vec<TagSequence>,
    ) {
        if prefix.len() == n {
            out.push(TagSequence::new(prefix.clone()));
            return;
        }
        for t in 0..num_tags {
            if let Some(&last) = prefix.last() {
                if !allowed(prefix.len() - 1, last, t) {
                    continue;
                }
            }
            prefix.push(t);
            extend(prefix, n, num_tags, allowed, out);
            prefix.pop();
        }
    }
    extend(&mut prefix, n, num_tags, &allowed, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_without_mask() {
        let shape = ProblemShape::new(3, 2).unwrap();
        let all = enumerate_sequences(shape, None).unwrap();
        assert_eq!(all.len(), 8);
        assert_eq!(all[0].tags(), &[0, 0, 0]);
        assert_eq!(all[7].tags(), &[1, 1, 1]);
        assert!(all.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn forbidding_arcs_out_of_first_tag() {
        let shape = ProblemShape::new(3, 2).unwrap();
        let mask = TransitionMask::from_fn(shape, |i, t, _| !(i == 0 && t == 1)).unwrap();
        let seqs = enumerate_sequences(shape, Some(&mask)).unwrap();
        assert_eq!(seqs.len(), 4);
        assert!(seqs.iter().all(|x| x.tags()[0] == 0));
    }

    #[test]
    fn guard_rejects_large_problems() {
        let shape = ProblemShape::new(21, 2).unwrap();
        assert!(matches!(
            enumerate_sequences(shape, None),
            Err(Error::EnumerationTooLarge { .. })
        ));
        let ok = ProblemShape::new(6, 10).unwrap();
        assert_eq!(sequence_count(ok), 1_000_000);
    }
}
