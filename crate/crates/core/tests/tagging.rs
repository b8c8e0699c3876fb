mod common;

use bcrf_core::logspace::NEG_INF;
use bcrf_core::tagging::*;
use common::*;
use proptest::prelude::*;
use rand::Rng;

/// Number of allowed paths by sum-product over 0/1 weights.
fn count_paths(mask: &TransitionMask) -> u64 {
    let s = mask.shape();
    let t = s.num_tags();
    let mut counts = vec![1u64; t];
    for i in 0..s.num_slices() {
        counts = (0..t)
            .map(|to| (0..t).filter(|&from| mask.is_allowed(i, from, to)).map(|from| counts[from]).sum())
            .collect();
    }
    counts.iter().sum()
}

#[test]
fn encode_examples() {
    let s = shape(3, 2);
    let y = encode_sequence(s, &vec![0, 1, 0].into()).unwrap();
    let mut expected = vec![0.0; 8];
    expected[s.index(0, 0, 1)] = 1.0;
    expected[s.index(1, 1, 0)] = 1.0;
    assert_eq!(y.values(), &expected[..]);
    let single = encode_sequence(shape(3, 1), &vec![0, 0, 0].into()).unwrap();
    assert_eq!(single.values(), &[1.0, 1.0]);
}

#[test]
fn encoded_slices_sum_to_one() {
    let mut r = rng(11);
    let s = shape(6, 3);
    for _ in 0..100 {
        let x = random_sequence(&mut r, s);
        let y = encode_sequence(s, &x).unwrap();
        for i in 0..s.num_slices() {
            assert_eq!(y.values()[i * 9..(i + 1) * 9].iter().sum::<f64>(), 1.0);
        }
        assert_eq!(y.decode(), x);
    }
}

#[test]
fn score_walks_the_path() {
    let mut r = rng(12);
    for _ in 0..50 {
        let s = random_shape(&mut r, (3, 7), (1, 4));
        let w = gaussian_weights(&mut r, s, 2.0);
        let x = random_sequence(&mut r, s);
        let walked: f64 = (0..s.num_slices()).map(|i| w.get(i, x.tags()[i], x.tags()[i + 1])).sum();
        let via_stats = score(&w, &encode_sequence(s, &x).unwrap()).unwrap();
        assert!((walked - via_stats).abs() < 1e-12);
    }
}

#[test]
fn score_of_indicator_with_itself() {
    let s = shape(5, 3);
    let y = encode_sequence(s, &vec![2, 2, 0, 1, 0].into()).unwrap();
    let w = WeightTensor::new(s, y.values().to_vec()).unwrap();
    assert_eq!(score(&w, &y).unwrap(), 4.0);
    assert_eq!(score(&WeightTensor::zeros(s), &y).unwrap(), 0.0);
}

#[test]
fn enumeration_counts() {
    let s = shape(3, 2);
    assert_eq!(enumerate_sequences(s, None).unwrap().len(), 8);
    let mask = TransitionMask::from_fn(s, |i, t, _| !(i == 0 && t == 1)).unwrap();
    let seqs = enumerate_sequences(s, Some(&mask)).unwrap();
    assert_eq!(seqs.len(), 4);
    assert!(seqs.iter().all(|x| x.tags()[0] == 0));
}

#[test]
fn enumeration_matches_path_counting() {
    let mut r = rng(13);
    let s = shape(4, 3);
    for _ in 0..100 {
        let mask = random_mask(&mut r, s, 0.4);
        let seqs = enumerate_sequences(s, Some(&mask)).unwrap();
        assert_eq!(seqs.len() as u64, count_paths(&mask));
        // lexicographic and unique
        assert!(seqs.windows(2).all(|p| p[0].tags() < p[1].tags()));
    }
}

#[test]
fn enumeration_guard() {
    let s = shape(13, 3); // 3^13 > 10^6
    assert!(enumerate_sequences(s, None).is_err());
    assert!(enumerate_sequences(shape(12, 3), None).is_ok());
}

#[test]
fn reachability_agrees_with_enumeration() {
    let mut r = rng(14);
    let mut unreachable = 0;
    for _ in 0..300 {
        let s = random_shape(&mut r, (3, 6), (1, 3));
        let allowed: Vec<bool> = (0..s.num_arcs()).map(|_| r.random_bool(0.35)).collect();
        let w = WeightTensor::new(s, allowed.iter().map(|&a| if a { 0.0 } else { NEG_INF }).collect()).unwrap();
        let reach = validate_reachability(&w);
        let any = enumerate_sequences(s, None)
            .unwrap()
            .iter()
            .any(|x| sequence_score(&w, x).unwrap() != NEG_INF);
        assert_eq!(reach.reachable, any, "{}", reach.diagnostic);
        if !any {
            unreachable += 1;
            assert!(TransitionMask::new(s, allowed).is_err());
        }
    }
    assert!(unreachable > 0);
}

#[test]
fn blocked_cluster_mask() {
    let s = shape(5, 3);
    let allowed: Vec<bool> = (0..s.num_arcs()).map(|a| s.unindex(a).0 != 0).collect();
    assert!(TransitionMask::new(s, allowed).is_err());
    assert!(TransitionMask::all_allowed(s).allowed().iter().all(|&a| a));
}

#[test]
fn apply_mask_examples() {
    let mut r = rng(15);
    let s = shape(5, 3);
    let w = gaussian_weights(&mut r, s, 3.0);
    assert_eq!(apply_mask(&w, &TransitionMask::all_allowed(s)).unwrap(), w);
    let x = random_sequence(&mut r, s);
    let masked = apply_mask(&w, &TransitionMask::singleton(s, &x).unwrap()).unwrap();
    let expected = sequence_score(&w, &x).unwrap();
    assert!((bcrf_core::dp::forward_log_z(&masked).unwrap() - expected).abs() < 1e-12);
    assert!(TransitionMask::new(s, vec![false; s.num_arcs()]).is_err());
}

#[test]
fn mask_semantics() {
    let mut r = rng(16);
    for _ in 0..100 {
        let s = random_shape(&mut r, (3, 5), (2, 3));
        let mask = random_mask(&mut r, s, 0.3);
        let penalty = mask.to_weights();
        let expected: Vec<TagSequence> = enumerate_sequences(s, None)
            .unwrap()
            .into_iter()
            .filter(|x| score(&penalty, &encode_sequence(s, x).unwrap()).unwrap().is_finite())
            .collect();
        assert_eq!(enumerate_sequences(s, Some(&mask)).unwrap(), expected);
    }
}

#[test]
fn bijection_with_binary_points() {
    for (n, t) in [(3, 2), (4, 2), (3, 3), (5, 2)] {
        let s = shape(n, t);
        let seqs = enumerate_sequences(s, None).unwrap();
        for x in &seqs {
            let q: MarginalTensor = encode_sequence(s, x).unwrap().into();
            assert_eq!(is_vertex(&q).as_ref(), Some(x));
        }
        // every binary vector in the arc space, checked for feasibility
        if s.num_arcs() <= 16 {
            let feasible = (0u32..1 << s.num_arcs())
                .filter(|bits| {
                    let v = (0..s.num_arcs()).map(|k| ((bits >> k) & 1) as f64).collect();
                    is_vertex(&MarginalTensor::new(s, v).unwrap()).is_some()
                })
                .count();
            assert_eq!(feasible, seqs.len(), "{s}");
        }
    }
}

#[test]
fn polytope_examples() {
    let s = shape(6, 3);
    let report = check_polytope_membership(&MarginalTensor::uniform(s), 1e-15);
    assert!(report.passed());
    let off = MarginalTensor::new(s, vec![0.2; s.num_arcs()]).unwrap();
    let report = check_polytope_membership(&off, 1e-6);
    assert!(!report.passed());
    assert!((report.entering_residual - 0.8).abs() < 1e-12);
}

proptest! {
    #[test]
    fn convex_combinations_are_feasible(
        n in 3usize..7,
        t in 1usize..4,
        picks in prop::collection::vec((any::<u64>(), 0.0f64..1.0), 1..6),
    ) {
        let s = shape(n, t);
        let seqs = enumerate_sequences(s, None).unwrap();
        let total: f64 = picks.iter().map(|p| p.1).sum::<f64>() + 1e-3;
        let mut q = vec![0.0; s.num_arcs()];
        let mut weight_left = 1.0;
        for (k, (idx, lambda)) in picks.iter().enumerate() {
            let x = &seqs[(*idx as usize) % seqs.len()];
            let share = if k + 1 == picks.len() { weight_left } else { lambda / total };
            weight_left -= share;
            for a in x.arcs(s) {
                q[a] += share;
            }
        }
        let q = MarginalTensor::new(s, q).unwrap();
        prop_assert!(check_polytope_membership(&q, 1e-12).passed());
    }

    #[test]
    fn encode_decode_roundtrip(tags in prop::collection::vec(0usize..4, 3..10)) {
        let s = shape(tags.len(), 4);
        let x = TagSequence::new(tags);
        let y = encode_sequence(s, &x).unwrap();
        prop_assert_eq!(y.decode(), x.clone());
        prop_assert_eq!(is_vertex(&y.into()), Some(x));
    }
}
