//! Brute-force certification of the inference routines on small random instances.

use std::fmt;

use bcrf_core::dp::{crf_marginals, forward_log_z, viterbi};
use bcrf_core::ibp::{ibp_infer, IbpConfig};
use bcrf_core::logspace::NEG_INF;
use bcrf_core::oracle::{oracle_crf_marginals, oracle_log_z, oracle_map, oracle_meanreg};
use bcrf_core::tagging::{ProblemShape, TransitionMask, WeightTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::Result;

pub const LOG_Z_TOL: f64 = 1e-9;
pub const MARGINAL_TOL: f64 = 1e-8;
pub const MEANREG_TOL: f64 = 1e-5;

/// Weights ~ N(0, 3^2) on n in [3, 6], |T| in [2, 3]; half the draws get a
/// reachable random mask forbidding about 20% of arcs.
pub fn random_instance(rng: &mut impl Rng) -> WeightTensor {
    let shape = ProblemShape::new(rng.random_range(3..=6), rng.random_range(2..=3)).expect("valid shape");
    let normal = Normal::new(0.0, 3.0).expect("positive sd");
    let mut values: Vec<f64> = (0..shape.num_arcs()).map(|_| normal.sample(rng)).collect();
    if rng.random_bool(0.5) {
        let mask = loop {
            let allowed: Vec<bool> = (0..shape.num_arcs()).map(|_| !rng.random_bool(0.2)).collect();
            if let Ok(m) = TransitionMask::new(shape, allowed) {
                break m;
            }
        };
        for (v, &a) in values.iter_mut().zip(mask.allowed()) {
            if !a {
                *v = NEG_INF;
            }
        }
    }
    WeightTensor::new(shape, values).expect("finite or -inf weights")
}

#[derive(Debug, Clone, Copy)]
pub struct OracleCheckConfig {
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleReport {
    pub instances: usize,
    pub max_log_z_err: f64,
    pub max_marginal_err: f64,
    pub viterbi_mismatches: usize,
    pub max_meanreg_err: f64,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.max_log_z_err <= LOG_Z_TOL
            && self.max_marginal_err <= MARGINAL_TOL
            && self.viterbi_mismatches == 0
            && self.max_meanreg_err <= MEANREG_TOL
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "instances          {}", self.instances)?;
        writeln!(f, "logZ error         {:.3e} (tol {LOG_Z_TOL:e})", self.max_log_z_err)?;
        writeln!(f, "marginal error     {:.3e} (tol {MARGINAL_TOL:e})", self.max_marginal_err)?;
        writeln!(f, "viterbi mismatches {}", self.viterbi_mismatches)?;
        writeln!(f, "ibp error          {:.3e} (tol {MEANREG_TOL:e})", self.max_meanreg_err)?;
        writeln!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Exact DP against enumeration, and converged IBP against the explicit
/// mean-regularized optimum.
pub fn oracle_check(cfg: &OracleCheckConfig) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let instances: Vec<WeightTensor> = (0..cfg.count).map(|_| random_instance(&mut rng)).collect();
    let ibp = IbpConfig::training().converged();
    let rows: Vec<OracleReport> = instances
        .par_iter()
        .map(|w| {
            let log_z = (forward_log_z(w)? - oracle_log_z(w)?).abs();
            let marg = max_abs_diff(crf_marginals(w)?.values(), oracle_crf_marginals(w)?.values());
            let vit = usize::from(viterbi(w)?.0 != oracle_map(w)?.0);
            let q = ibp_infer(w, &ibp)?.0;
            let exact = oracle_meanreg(w, 1e-14)?.q;
            Ok(OracleReport {
                instances: 1,
                max_log_z_err: log_z,
                max_marginal_err: marg,
                viterbi_mismatches: vit,
                max_meanreg_err: max_abs_diff(q.values(), exact.values()),
            })
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().fold(OracleReport::default(), |a, r| OracleReport {
        instances: a.instances + r.instances,
        max_log_z_err: a.max_log_z_err.max(r.max_log_z_err),
        max_marginal_err: a.max_marginal_err.max(r.max_marginal_err),
        viterbi_mismatches: a.viterbi_mismatches + r.viterbi_mismatches,
        max_meanreg_err: a.max_meanreg_err.max(r.max_meanreg_err),
    }))
}
