//! Brute-force ground truth for desk-scale problems.
//!
//! Everything here works on the explicit list of labelings and shares no code
//! path with the dynamic programs or the projection solver it is used to check.

use crate::error::{Error, Result};
use crate::logspace::{self, NEG_INF};
use crate::tagging::{enumerate_sequences, MarginalTensor, ProblemShape, TagSequence, TransitionMask, WeightTensor};

/// Vertex budget for [`oracle_meanreg`].
pub const MEANREG_VERTEX_LIMIT: usize = 10_000;
/// Step budget for [`oracle_meanreg`].
pub const MEANREG_MAX_STEPS: usize = 100_000;
/// Per-step change of `q` below which [`oracle_meanreg`] may stop.
const Q_CHANGE_TOL: f64 = 1e-11;

/// The labelings with finite score under `w`, listed explicitly.
#[derive(Debug, Clone)]
pub struct ExplicitFamily {
    shape: ProblemShape,
    vertices: Vec<TagSequence>,
    /// Arc ids used by each vertex.
    arcs: Vec<Vec<usize>>,
    scores: Vec<f64>,
}

impl ExplicitFamily {
    pub fn new(w: &WeightTensor) -> Result<Self> {
        let shape = w.shape();
        let support = TransitionMask::new(shape, w.values().iter().map(|&v| v != NEG_INF).collect())?;
        let vertices = enumerate_sequences(shape, Some(&support))?;
        let arcs: Vec<Vec<usize>> = vertices.iter().map(|x| x.arcs(shape).collect()).collect();
        let scores = arcs
            .iter()
            .map(|a| a.iter().map(|&k| w.values()[k]).sum())
            .collect();
        Ok(Self {
            shape,
            vertices,
            arcs,
            scores,
        })
    }

    pub fn shape(&self) -> ProblemShape {
        self.shape
    }

    pub fn vertices(&self) -> &[TagSequence] {
        &self.vertices
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// `M p`: the arc marginals of a distribution over the vertices.
    pub fn push_forward(&self, p: &SimplexPoint) -> Result<MarginalTensor> {
        if p.p.len() != self.len() {
            return Err(Error::WrongLength {
                expected: self.len(),
                found: p.p.len(),
            });
        }
        MarginalTensor::new(self.shape, self.accumulate(&p.p))
    }

    fn accumulate(&self, p: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.shape.num_arcs()];
        for (arcs, &pv) in self.arcs.iter().zip(p) {
            for &a in arcs {
                q[a] += pv;
            }
        }
        q
    }
}

/// A probability vector over the vertices of an [`ExplicitFamily`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint {
    p: Vec<f64>,
}

impl SimplexPoint {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        let sum: f64 = p.iter().sum();
        if p.is_empty() || p.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig("not a probability vector".into()));
        }
        Ok(Self { p })
    }

    pub fn uniform(len: usize) -> Self {
        Self {
            p: vec![1.0 / len as f64; len],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }
}

/// `log sum_y exp <w, y>` by enumeration.
pub fn oracle_log_z(w: &WeightTensor) -> Result<f64> {
    Ok(logspace::logsumexp(ExplicitFamily::new(w)?.scores()))
}

/// `sum_y p_w(y) y` by enumeration.
pub fn oracle_crf_marginals(w: &WeightTensor) -> Result<MarginalTensor> {
    let family = ExplicitFamily::new(w)?;
    let log_z = logspace::logsumexp(family.scores());
    let p: Vec<f64> = family.scores().iter().map(|&s| (s - log_z).exp()).collect();
    MarginalTensor::new(family.shape, family.accumulate(&p))
}

/// First labeling in lexicographic order with the highest score.
pub fn oracle_map(w: &WeightTensor) -> Result<(TagSequence, f64)> {
    let family = ExplicitFamily::new(w)?;
    let mut best = 0;
    for (k, &s) in family.scores().iter().enumerate() {
        if s > family.scores[best] {
            best = k;
        }
    }
    Ok((family.vertices[best].clone(), family.scores[best]))
}

#[derive(Debug, Clone)]
pub struct MeanRegSolution {
    pub q: MarginalTensor,
    pub value: f64,
    pub p: SimplexPoint,
    pub steps: usize,
}

/// `max_{p in simplex} <p, M^T w> + H(M p)` by exponentiated-gradient ascent.
///
/// The maximizing `q = M p` is unique even though `p` is not. Fails if the
/// value has not settled to `tol` within [`MEANREG_MAX_STEPS`] steps.
pub fn oracle_meanreg(w: &WeightTensor, tol: f64) -> Result<MeanRegSolution> {
    let family = ExplicitFamily::new(w)?;
    if family.len() > MEANREG_VERTEX_LIMIT {
        return Err(Error::EnumerationTooLarge {
            count: family.len() as u128,
            limit: MEANREG_VERTEX_LIMIT as u128,
        });
    }
    let step = meanreg_step(w);
    let m = family.len();
    let mut log_p = vec![-(m as f64).ln(); m];
    let mut p = vec![1.0 / m as f64; m];
    let mut value = f64::NEG_INFINITY;
    let mut g = vec![0.0; m];
    let mut last_q = vec![0.0; family.shape.num_arcs()];
    for steps in 1..=MEANREG_MAX_STEPS {
        let q = family.accumulate(&p);
        let new_value = objective(&family, &p, &q);
        let change = (new_value - value).abs();
        let q_change = q.iter().zip(&last_q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        value = new_value;
        if change <= tol && q_change <= Q_CHANGE_TOL {
            return Ok(MeanRegSolution {
                q: MarginalTensor::new(family.shape, q)?,
                value,
                p: SimplexPoint { p },
                steps,
            });
        }
        last_q.copy_from_slice(&q);
        let neg_log_q: Vec<f64> = q.iter().map(|&x| if x > 0.0 { -x.ln() - 1.0 } else { 0.0 }).collect();
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = family.scores[k] + family.arcs[k].iter().map(|&a| neg_log_q[a]).sum::<f64>();
        }
        for (lp, gk) in log_p.iter_mut().zip(&g) {
            *lp += step * gk;
        }
        let norm = logspace::logsumexp(&log_p);
        for (pk, lp) in p.iter_mut().zip(log_p.iter_mut()) {
            *lp -= norm;
            *pk = lp.exp();
        }
        if steps == MEANREG_MAX_STEPS {
            return Err(Error::OracleNoConvergence { steps, change });
        }
    }
    unreachable!("loop returns on its last step")
}

fn meanreg_step(w: &WeightTensor) -> f64 {
    let norm = w
        .values()
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    (0.5 / norm).clamp(0.05, 1.0 / w.shape().num_slices() as f64)
}

fn objective(family: &ExplicitFamily, p: &[f64], q: &[f64]) -> f64 {
    let linear: f64 = p.iter().zip(&family.scores).map(|(a, b)| a * b).sum();
    linear + logspace::entropy(q)
}

/// Central differences `(f(w + h e_k) - f(w - h e_k)) / 2h` for every finite
/// coordinate; `-inf` coordinates get 0.
pub fn finite_diff_grad<F>(f: F, w: &WeightTensor, h: f64) -> Result<Vec<f64>>
where
    F: Fn(&WeightTensor) -> Result<f64>,
{
    let mut grad = vec![0.0; w.values().len()];
    for (k, &v) in w.values().iter().enumerate() {
        if v == NEG_INF {
            continue;
        }
        let plus = f(&w.with_value(k, v + h)?)?;
        let minus = f(&w.with_value(k, v - h)?)?;
        grad[k] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}
