#![allow(dead_code)]

use bcrf_core::logspace::NEG_INF;
use bcrf_core::tagging::{validate_reachability, ProblemShape, TagSequence, TransitionMask, WeightTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn shape(n: usize, t: usize) -> ProblemShape {
    ProblemShape::new(n, t).unwrap()
}

pub fn random_shape(rng: &mut impl Rng, n: (usize, usize), t: (usize, usize)) -> ProblemShape {
    shape(rng.random_range(n.0..=n.1), rng.random_range(t.0..=t.1))
}

/// Entries drawn from N(0, sd^2).
pub fn gaussian_weights(rng: &mut impl Rng, s: ProblemShape, sd: f64) -> WeightTensor {
    let normal = Normal::new(0.0, sd).unwrap();
    WeightTensor::new(s, (0..s.num_arcs()).map(|_| normal.sample(rng)).collect()).unwrap()
}

/// Each arc forbidden with probability `p`; redrawn until a path survives.
pub fn random_mask(rng: &mut impl Rng, s: ProblemShape, p: f64) -> TransitionMask {
    loop {
        let allowed: Vec<bool> = (0..s.num_arcs()).map(|_| !rng.random_bool(p)).collect();
        if let Ok(m) = TransitionMask::new(s, allowed) {
            return m;
        }
    }
}

/// Gaussian weights with a random 20% of arcs forbidden on half the draws.
pub fn random_instance(rng: &mut impl Rng, n: (usize, usize), t: (usize, usize)) -> WeightTensor {
    let s = random_shape(rng, n, t);
    let w = gaussian_weights(rng, s, 3.0);
    if rng.random_bool(0.5) {
        let mask = random_mask(rng, s, 0.2);
        let values = w
            .values()
            .iter()
            .zip(mask.allowed())
            .map(|(&v, &a)| if a { v } else { NEG_INF })
            .collect();
        let masked = WeightTensor::new(s, values).unwrap();
        assert!(validate_reachability(&masked).reachable);
        masked
    } else {
        w
    }
}

pub fn random_sequence(rng: &mut impl Rng, s: ProblemShape) -> TagSequence {
    TagSequence::new((0..s.len()).map(|_| rng.random_range(0..s.num_tags())).collect())
}

/// A random labeling with finite score under `w`.
pub fn random_feasible_sequence(rng: &mut impl Rng, w: &WeightTensor) -> TagSequence {
    loop {
        let x = random_sequence(rng, w.shape());
        if bcrf_core::tagging::sequence_score(w, &x).unwrap() != NEG_INF {
            return x;
        }
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// A draw from the symmetric Dirichlet with concentration `alpha`, by normalized Gammas.
pub fn dirichlet(rng: &mut impl Rng, dim: usize, alpha: f64) -> Vec<f64> {
    let gamma = rand_distr::Gamma::new(alpha, 1.0).unwrap();
    let g: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
    let total: f64 = g.iter().sum();
    g.into_iter().map(|x| x / total).collect()
}
