//! Mean-regularized inference by iterative Bregman projections.
//!
//! The target is the KL projection of `exp(w / tau)` onto the tagging
//! polytope, i.e. `argmax_q <q, w> + tau H(q)`. The polytope is the
//! intersection of the constraint sets of the interior clusters; clusters of
//! equal parity touch disjoint arcs, so each parity is projected in closed
//! form, cluster by cluster, and the two parities alternate. Everything runs
//! in the log domain.

use rayon::prelude::*;

use crate::dp::viterbi;
use crate::error::{Error, Result};
use crate::logspace::{self, NEG_INF};
use crate::tagging::{
    check_polytope_membership, sequence_score, validate_reachability, MarginalTensor, ProblemShape, TagSequence,
    WeightTensor,
};

/// Temperature used for decoding.
pub const DEFAULT_TAU_INVERSE: f64 = 10.0;
/// Full sweeps (odd then even) run by default.
pub const DEFAULT_SWEEPS: usize = 10;
/// Feasibility tolerance accepted by [`bcrf_value`].
pub const VALUE_FEASIBILITY_TOL: f64 = 1e-8;

/// Which regime a configuration is meant for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IbpMode {
    /// Approximate MAP / MBR decoding, usually at `tau^-1 = 10`.
    Decode,
    /// Marginals for losses and gradients, usually at `tau = 1`.
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbpConfig {
    pub tau_inverse: f64,
    /// Number of full sweeps. One sweep projects the odd clusters, then the even ones.
    pub max_iters: usize,
    /// Stop early once the odd-cluster residual after a sweep is at most `tol`.
    /// Zero runs exactly `max_iters` sweeps.
    pub tol: f64,
    pub mode: IbpMode,
    /// Record per-half-sweep residuals and per-sweep changes.
    pub record_trace: bool,
}

impl Default for IbpConfig {
    fn default() -> Self {
        Self::decoding()
    }
}

impl IbpConfig {
    pub fn decoding() -> Self {
        Self {
            tau_inverse: DEFAULT_TAU_INVERSE,
            max_iters: DEFAULT_SWEEPS,
            tol: 0.0,
            mode: IbpMode::Decode,
            record_trace: false,
        }
    }

    pub fn training() -> Self {
        Self {
            tau_inverse: 1.0,
            mode: IbpMode::Marginal,
            ..Self::decoding()
        }
    }

    /// Runs to a residual of `1e-10` (or 100k sweeps).
    pub fn converged(mut self) -> Self {
        self.tol = 1e-10;
        self.max_iters = 100_000;
        self
    }

    pub fn with_tau_inverse(mut self, tau_inverse: f64) -> Self {
        self.tau_inverse = tau_inverse;
        self
    }

    pub fn with_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    pub fn tau(&self) -> f64 {
        1.0 / self.tau_inverse
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_inverse.is_finite() && self.tau_inverse > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tau_inverse must be finite and positive, got {}",
                self.tau_inverse
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be nonnegative, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Parity of an interior cluster, counting positions from 1 as in `V_1 .. V_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    /// Projection order within a sweep.
    pub const ORDER: [Parity; 2] = [Parity::Odd, Parity::Even];

    pub fn other(self) -> Parity {
        match self {
            Parity::Odd => Parity::Even,
            Parity::Even => Parity::Odd,
        }
    }

    /// First transition slice entering a cluster of this parity.
    fn first_slice(self) -> usize {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }

    /// Parity of the cluster at 0-based `position`.
    pub fn of_position(position: usize) -> Parity {
        if (position + 1).is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Log-domain arc values of the current projection iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct LogIterate {
    shape: ProblemShape,
    values: Vec<f64>,
}

impl LogIterate {
    /// `log q = scale * w`, keeping forbidden arcs at `-inf`.
    pub fn from_weights(w: &WeightTensor, scale: f64) -> Self {
        Self {
            shape: w.shape(),
            values: w.values().iter().map(|&v| v * scale).collect(),
        }
    }

    pub fn shape(&self) -> ProblemShape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_marginals(&self) -> Result<MarginalTensor> {
        MarginalTensor::new(self.shape, self.values.iter().map(|&v| v.exp()).collect())
    }

    /// Max constraint violation over the clusters of one parity, in the linear domain.
    pub fn residual(&self, parity: Parity) -> f64 {
        let t = self.shape.num_tags();
        let tt = t * t;
        let mut worst: f64 = 0.0;
        for block in self.values[parity.first_slice() * tt..].chunks_exact(2 * tt) {
            let (enter, leave) = block.split_at(tt);
            let total: f64 = enter.iter().map(|v| v.exp()).sum();
            worst = worst.max((total - 1.0).abs());
            for v in 0..t {
                let inflow: f64 = (0..t).map(|from| enter[from * t + v].exp()).sum();
                let outflow: f64 = leave[v * t..(v + 1) * t].iter().map(|x| x.exp()).sum();
                worst = worst.max((inflow - outflow).abs());
            }
        }
        worst
    }
}

struct Scratch {
    log_in: Vec<f64>,
    log_out: Vec<f64>,
    column: Vec<f64>,
}

impl Scratch {
    fn new(t: usize) -> Self {
        Self {
            log_in: vec![0.0; t],
            log_out: vec![0.0; t],
            column: vec![0.0; t],
        }
    }
}

/// Closed-form KL projection of one cluster's arcs onto its constraints.
///
/// `block` holds the entering slice followed by the leaving slice. Returns
/// `false` when no node of the cluster has both finite inflow and outflow.
fn project_block(block: &mut [f64], t: usize, scratch: &mut Scratch) -> bool {
    let (enter, leave) = block.split_at_mut(t * t);
    for v in 0..t {
        for from in 0..t {
            scratch.column[from] = enter[from * t + v];
        }
        scratch.log_in[v] = logspace::logsumexp(&scratch.column);
        scratch.log_out[v] = logspace::logsumexp(&leave[v * t..(v + 1) * t]);
    }
    // log Z = logsumexp_v (log W-(v) + sigma(v)) = logsumexp_v ½(log W-(v) + log W+(v))
    let log_z = logspace::logsumexp_iter(
        (0..t)
            .filter(|&v| scratch.log_in[v] != NEG_INF && scratch.log_out[v] != NEG_INF)
            .map(|v| 0.5 * (scratch.log_in[v] + scratch.log_out[v])),
    );
    if log_z == NEG_INF {
        return false;
    }
    for v in 0..t {
        let (lin, lout) = (scratch.log_in[v], scratch.log_out[v]);
        if lin == NEG_INF || lout == NEG_INF {
            for from in 0..t {
                enter[from * t + v] = NEG_INF;
            }
            leave[v * t..(v + 1) * t].fill(NEG_INF);
            continue;
        }
        let sigma = 0.5 * lout - 0.5 * lin;
        let enter_shift = sigma - log_z;
        for from in 0..t {
            enter[from * t + v] += enter_shift;
        }
        let leave_shift = -sigma - log_z;
        for x in &mut leave[v * t..(v + 1) * t] {
            *x += leave_shift;
        }
    }
    true
}

/// Projects the cluster at 0-based `position` (`1 <= position <= n - 2`).
pub fn cluster_project(iterate: &mut LogIterate, position: usize) -> Result<()> {
    let shape = iterate.shape;
    if position == 0 || position + 1 >= shape.len() {
        return Err(Error::InvalidConfig(format!(
            "cluster {position} is not interior for {shape}"
        )));
    }
    let tt = shape.slice_len();
    let block = &mut iterate.values[(position - 1) * tt..(position + 1) * tt];
    if project_block(block, shape.num_tags(), &mut Scratch::new(shape.num_tags())) {
        Ok(())
    } else {
        Err(Error::DeadCluster { cluster: position })
    }
}

/// Below this many arcs a parity is projected without the thread pool.
const PARALLEL_MIN_ARCS: usize = 1 << 14;

/// Projects every cluster of one parity; the clusters are independent.
fn project_parity(iterate: &mut LogIterate, parity: Parity) -> Result<()> {
    let shape = iterate.shape;
    let t = shape.num_tags();
    let tt = t * t;
    let start = parity.first_slice() * tt;
    if start >= iterate.values.len() {
        return Ok(());
    }
    let body = &mut iterate.values[start..];
    // block k covers the cluster at 0-based position first_slice + 2k + 1
    let dead = |k: usize| Error::DeadCluster {
        cluster: parity.first_slice() + 2 * k + 1,
    };
    if shape.num_arcs() >= PARALLEL_MIN_ARCS {
        body.par_chunks_exact_mut(2 * tt)
            .enumerate()
            .try_for_each_init(
                || Scratch::new(t),
                |scratch, (k, block)| if project_block(block, t, scratch) { Ok(()) } else { Err(dead(k)) },
            )
    } else {
        let mut scratch = Scratch::new(t);
        for (k, block) in body.chunks_exact_mut(2 * tt).enumerate() {
            if !project_block(block, t, &mut scratch) {
                return Err(dead(k));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSweep {
    pub sweep: usize,
    pub parity: Parity,
    /// Residual of the parity just projected.
    pub own_residual: f64,
    /// Residual of the other parity.
    pub other_residual: f64,
}

/// What happened during one [`ibp_infer`] run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IbpTrace {
    pub sweeps_run: usize,
    /// Odd-cluster residual at exit, when it was measured.
    pub final_residual: Option<f64>,
    pub half_sweeps: Vec<HalfSweep>,
    /// Max-norm change of `q` over each sweep.
    pub sweep_changes: Vec<f64>,
}

impl IbpTrace {
    pub fn order(&self) -> [Parity; 2] {
        Parity::ORDER
    }
}

fn ensure_reachable(w: &WeightTensor) -> Result<()> {
    let r = validate_reachability(w);
    if r.reachable {
        Ok(())
    } else {
        Err(Error::Unreachable(r.diagnostic))
    }
}

/// Approximates `grad B_Y(w / tau)`, the marginals of the mean-regularized model.
pub fn ibp_infer(w: &WeightTensor, cfg: &IbpConfig) -> Result<(MarginalTensor, IbpTrace)> {
    cfg.validate()?;
    ensure_reachable(w)?;
    let mut iterate = LogIterate::from_weights(w, cfg.tau_inverse);
    let mut trace = IbpTrace::default();
    let mut previous: Option<Vec<f64>> = None;
    for sweep in 1..=cfg.max_iters {
        if cfg.record_trace {
            previous = Some(iterate.values.iter().map(|v| v.exp()).collect());
        }
        for parity in Parity::ORDER {
            project_parity(&mut iterate, parity)?;
            if cfg.record_trace {
                trace.half_sweeps.push(HalfSweep {
                    sweep,
                    parity,
                    own_residual: iterate.residual(parity),
                    other_residual: iterate.residual(parity.other()),
                });
            }
        }
        if iterate.values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::NonFinite { sweep });
        }
        trace.sweeps_run = sweep;
        if let Some(prev) = previous.take() {
            let change = prev
                .iter()
                .zip(&iterate.values)
                .map(|(&a, &b)| (a - b.exp()).abs())
                .fold(0.0, f64::max);
            trace.sweep_changes.push(change);
        }
        if cfg.tol > 0.0 {
            let residual = iterate.residual(Parity::Odd);
            trace.final_residual = Some(residual);
            if residual <= cfg.tol {
                break;
            }
        }
    }
    Ok((iterate.to_marginals()?, trace))
}

/// `<q, w> + H(q)` without a feasibility check.
pub fn mean_reg_objective(w: &WeightTensor, q: &MarginalTensor) -> Result<f64> {
    Ok(q.dot(w)? + q.entropy())
}

/// `<q, w> + H(q)` for a feasible `q`; at the optimum this is `B_Y(w)`.
pub fn bcrf_value(w: &WeightTensor, q: &MarginalTensor) -> Result<f64> {
    let report = check_polytope_membership(q, VALUE_FEASIBILITY_TOL);
    if !report.passed() {
        return Err(Error::Infeasible {
            residual: report.max_residual(),
            tol: VALUE_FEASIBILITY_TOL,
        });
    }
    mean_reg_objective(w, q)
}

/// `tau * B_Y(w / tau)` evaluated at the IBP solution, with the solution.
pub fn scaled_mean_reg_value(w: &WeightTensor, cfg: &IbpConfig) -> Result<(f64, MarginalTensor)> {
    let (q, _) = ibp_infer(w, cfg)?;
    let value = q.dot(w)? + cfg.tau() * q.entropy();
    Ok((value, q))
}

/// Per-position argmax of the tag marginals of `q`, lowest index on ties.
pub fn mbr_tags(q: &MarginalTensor) -> TagSequence {
    let tags = q
        .tag_marginals()
        .iter()
        .map(|m| crate::tagging::argmax(m).expect("non-empty tag set"))
        .collect();
    TagSequence::new(tags)
}

/// Minimum-Bayes-risk decoding from IBP marginals.
///
/// The per-position readout can pick a forbidden transition. With `repair`,
/// such an output is replaced by the best valid path under `log q`.
pub fn mbr_decode(w: &WeightTensor, cfg: &IbpConfig, repair: bool) -> Result<TagSequence> {
    let (q, _) = ibp_infer(w, cfg)?;
    let tags = mbr_tags(&q);
    if !repair || sequence_score(w, &tags)? != NEG_INF {
        return Ok(tags);
    }
    repair_path(w, &q)
}

fn repair_path(w: &WeightTensor, q: &MarginalTensor) -> Result<TagSequence> {
    let values = q
        .values()
        .iter()
        .zip(w.values())
        .map(|(&p, &wv)| if wv == NEG_INF || p <= 0.0 { NEG_INF } else { p.ln() })
        .collect();
    let log_q = WeightTensor::new(w.shape(), values)?;
    match viterbi(&log_q) {
        Ok((x, _)) => Ok(x),
        Err(Error::Unreachable(_)) => Ok(viterbi(w)?.0),
        Err(e) => Err(e),
    }
}

/// `tau * B_Y(w / tau) - max_x <w, phi(x)>`, which lies in `[0, tau (n-1) 2 ln|T|]`.
pub fn map_gap(w: &WeightTensor, cfg: &IbpConfig) -> Result<f64> {
    let (value, _) = scaled_mean_reg_value(w, cfg)?;
    let (_, best) = viterbi(w)?;
    Ok(value - best)
}

/// Independent IBP runs over a batch.
pub fn batched_ibp(ws: &[WeightTensor], cfg: &IbpConfig) -> Vec<Result<MarginalTensor>> {
    ws.par_iter().map(|w| ibp_infer(w, cfg).map(|(q, _)| q)).collect()
}
