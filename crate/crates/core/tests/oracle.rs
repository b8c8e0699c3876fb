mod common;

use bcrf_core::logspace;
use bcrf_core::oracle::*;
use bcrf_core::tagging::*;
use common::*;

#[test]
fn log_z_dominates_the_best_score() {
    let mut r = rng(71);
    for _ in 0..100 {
        let w = random_instance(&mut r, (3, 6), (2, 3));
        let family = ExplicitFamily::new(&w).unwrap();
        let best = family.scores().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z = oracle_log_z(&w).unwrap();
        if family.len() == 1 {
            assert_eq!(z, best);
        } else {
            assert!(z > best);
        }
    }
}

#[test]
fn vertex_order_does_not_matter() {
    let mut r = rng(72);
    for _ in 0..20 {
        let w = random_instance(&mut r, (3, 6), (2, 3));
        let mut scores = ExplicitFamily::new(&w).unwrap().scores().to_vec();
        let forward = logspace::logsumexp(&scores);
        scores.reverse();
        assert!((logspace::logsumexp(&scores) - forward).abs() <= 1e-12 * forward.abs().max(1.0));
        assert!((oracle_log_z(&w).unwrap() - forward).abs() <= 1e-12 * forward.abs().max(1.0));
    }
}

#[test]
fn family_matches_enumeration() {
    let mut r = rng(73);
    for _ in 0..50 {
        let s = random_shape(&mut r, (3, 6), (2, 3));
        let mask = random_mask(&mut r, s, 0.3);
        let w = apply_mask(&gaussian_weights(&mut r, s, 1.0), &mask).unwrap();
        let family = ExplicitFamily::new(&w).unwrap();
        assert_eq!(family.vertices(), &enumerate_sequences(s, Some(&mask)).unwrap()[..]);
    }
}

#[test]
fn meanreg_value_beats_random_feasible_points() {
    let mut r = rng(74);
    for _ in 0..20 {
        let w = random_instance(&mut r, (3, 5), (2, 3));
        let tol = 1e-12;
        let sol = oracle_meanreg(&w, tol).unwrap();
        let family = ExplicitFamily::new(&w).unwrap();
        for k in 0..1000 {
            let alpha = if k % 2 == 0 { 1.0 } else { 0.1 };
            let p = SimplexPoint::new(dirichlet(&mut r, family.len(), alpha)).unwrap_or(SimplexPoint::uniform(family.len()));
            let q = family.push_forward(&p).unwrap();
            let value = q.dot(&w).unwrap() + q.entropy();
            assert!(value <= sol.value + 1e-9);
        }
        assert!(check_polytope_membership(&sol.q, 1e-12).passed());
    }
}

#[test]
fn meanreg_is_above_the_best_score() {
    let mut r = rng(75);
    for _ in 0..30 {
        let w = random_instance(&mut r, (3, 5), (2, 3));
        let sol = oracle_meanreg(&w, 1e-12).unwrap();
        let best = oracle_map(&w).unwrap().1;
        assert!(sol.value >= best - 1e-12);
        assert!(oracle_log_z(&w).unwrap() >= best);
    }
}

#[test]
fn push_forward_checks_length() {
    let w = WeightTensor::zeros(shape(3, 2));
    let family = ExplicitFamily::new(&w).unwrap();
    assert!(family.push_forward(&SimplexPoint::uniform(3)).is_err());
    let q = family.push_forward(&SimplexPoint::uniform(8)).unwrap();
    assert!(q.values().iter().all(|&v| (v - 0.25).abs() < 1e-15));
}

#[test]
fn vertex_budget() {
    let w = WeightTensor::zeros(shape(9, 3)); // 19683 vertices
    assert!(matches!(
        oracle_meanreg(&w, 1e-10),
        Err(bcrf_core::Error::EnumerationTooLarge { .. })
    ));
}
