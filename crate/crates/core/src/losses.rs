//! Training losses and their gradients with respect to `w`.
//!
//! The Fenchel-Young losses use the temperature of the configuration they are
//! given: with `tau = 1` they are the plain mean-regularized losses, and in
//! general the value is `-<w, y> + tau B_Y(w / tau)` with gradient `q - y`.

use std::collections::BTreeMap;
use std::fmt;

use crate::dp::{crf_marginals, forward_log_z};
use crate::error::{Error, Result};
use crate::ibp::{ibp_infer, IbpConfig};
use crate::logspace::NEG_INF;
use crate::tagging::{apply_mask, score, MarginalTensor, ProblemShape, SufficientStats, TransitionMask, WeightTensor};

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub value: f64,
    pub grad: Vec<f64>,
    shape: ProblemShape,
}

impl LossOutput {
    fn new(shape: ProblemShape, value: f64, grad: Vec<f64>) -> Self {
        Self { value, grad, shape }
    }

    pub fn shape(&self) -> ProblemShape {
        self.shape
    }

    pub fn grad_max_abs(&self) -> f64 {
        self.grad.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

fn check_shape(w: &WeightTensor, other: ProblemShape) -> Result<()> {
    if w.shape() != other {
        return Err(Error::ShapeMismatch {
            expected: w.shape().to_string(),
            found: other.to_string(),
        });
    }
    Ok(())
}

fn gold_score(w: &WeightTensor, y: &SufficientStats) -> Result<f64> {
    check_shape(w, y.shape())?;
    let s = score(w, y)?;
    if s == NEG_INF {
        return Err(Error::GoldForbidden);
    }
    Ok(s)
}

fn difference(a: &MarginalTensor, b: &[f64]) -> Vec<f64> {
    a.values().iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `-<w, y> + A_Y(w)`, gradient `mu(w) - y`.
pub fn nll_loss(w: &WeightTensor, y: &SufficientStats) -> Result<LossOutput> {
    let gold = gold_score(w, y)?;
    let log_z = forward_log_z(w)?;
    let mu = crf_marginals(w)?;
    Ok(LossOutput::new(w.shape(), log_z - gold, difference(&mu, y.values())))
}

/// `-<w, y> + tau B_Y(w / tau)` (the entropy of a vertex is zero), gradient `q - y`.
///
/// `B_Y` is evaluated at whatever iterate `cfg` produces; with a fixed sweep
/// budget this is the truncated estimate used during training.
pub fn fy_mean_loss(w: &WeightTensor, y: &SufficientStats, cfg: &IbpConfig) -> Result<LossOutput> {
    let gold = gold_score(w, y)?;
    let (q, _) = ibp_infer(w, cfg)?;
    let value = q.dot(w)? + cfg.tau() * q.entropy() - gold;
    Ok(LossOutput::new(w.shape(), value, difference(&q, y.values())))
}

/// `A_Y(w) - A_Y~(w)`: negative log-likelihood of the allowed set.
pub fn partial_nll_loss(w: &WeightTensor, mask: &TransitionMask) -> Result<LossOutput> {
    check_shape(w, mask.shape())?;
    let masked = apply_mask(w, mask)?;
    let (full, restricted) = rayon::join(
        || Ok::<_, Error>((forward_log_z(w)?, crf_marginals(w)?)),
        || Ok::<_, Error>((forward_log_z(&masked)?, crf_marginals(&masked)?)),
    );
    let (log_z, mu) = full?;
    let (log_z_masked, mu_masked) = restricted?;
    Ok(LossOutput::new(
        w.shape(),
        log_z - log_z_masked,
        difference(&mu, mu_masked.values()),
    ))
}

/// `tau B_Y(w / tau) - tau B_Y~(w / tau)`, gradient `q - q~`. Two IBP runs.
pub fn partial_fy_loss(w: &WeightTensor, mask: &TransitionMask, cfg: &IbpConfig) -> Result<LossOutput> {
    check_shape(w, mask.shape())?;
    let masked = apply_mask(w, mask)?;
    let tau = cfg.tau();
    let run = |x: &WeightTensor| -> Result<(f64, MarginalTensor)> {
        let (q, _) = ibp_infer(x, cfg)?;
        Ok((q.dot(x)? + tau * q.entropy(), q))
    };
    let (full, restricted) = rayon::join(|| run(w), || run(&masked));
    let (value, q) = full?;
    let (value_masked, q_masked) = restricted?;
    Ok(LossOutput::new(
        w.shape(),
        value - value_masked,
        difference(&q, q_masked.values()),
    ))
}

/// What a training example provides.
#[derive(Debug, Clone, Copy)]
pub enum Supervision<'a> {
    Full(&'a SufficientStats),
    Partial(&'a TransitionMask),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SupervisionKind {
    Full,
    Partial,
}

impl Supervision<'_> {
    pub fn kind(&self) -> SupervisionKind {
        match self {
            Supervision::Full(_) => SupervisionKind::Full,
            Supervision::Partial(_) => SupervisionKind::Partial,
        }
    }
}

impl fmt::Display for SupervisionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SupervisionKind::Full => f.write_str("full"),
            SupervisionKind::Partial => f.write_str("partial"),
        }
    }
}

/// A loss selectable by name.
pub trait StructuredLoss: Send + Sync {
    fn name(&self) -> &'static str;

    fn supervision(&self) -> SupervisionKind;

    /// Whether the loss runs IBP (and so reads `cfg`).
    fn uses_ibp(&self) -> bool;

    fn evaluate(&self, w: &WeightTensor, target: Supervision<'_>, cfg: &IbpConfig) -> Result<LossOutput>;
}

fn wrong(loss: &'static str, expected: SupervisionKind) -> Error {
    Error::WrongSupervision {
        loss,
        reason: match expected {
            SupervisionKind::Full => "needs a gold sequence",
            SupervisionKind::Partial => "needs a transition mask",
        },
    }
}

pub struct Nll;
pub struct FenchelYoung;
pub struct PartialNll;
pub struct PartialFenchelYoung;

impl StructuredLoss for Nll {
    fn name(&self) -> &'static str {
        "nll"
    }

    fn supervision(&self) -> SupervisionKind {
        SupervisionKind::Full
    }

    fn uses_ibp(&self) -> bool {
        false
    }

    fn evaluate(&self, w: &WeightTensor, target: Supervision<'_>, _cfg: &IbpConfig) -> Result<LossOutput> {
        match target {
            Supervision::Full(y) => nll_loss(w, y),
            Supervision::Partial(_) => Err(wrong(self.name(), self.supervision())),
        }
    }
}

impl StructuredLoss for FenchelYoung {
    fn name(&self) -> &'static str {
        "fy"
    }

    fn supervision(&self) -> SupervisionKind {
        SupervisionKind::Full
    }

    fn uses_ibp(&self) -> bool {
        true
    }

    fn evaluate(&self, w: &WeightTensor, target: Supervision<'_>, cfg: &IbpConfig) -> Result<LossOutput> {
        match target {
            Supervision::Full(y) => fy_mean_loss(w, y, cfg),
            Supervision::Partial(_) => Err(wrong(self.name(), self.supervision())),
        }
    }
}

impl StructuredLoss for PartialNll {
    fn name(&self) -> &'static str {
        "partial-nll"
    }

    fn supervision(&self) -> SupervisionKind {
        SupervisionKind::Partial
    }

    fn uses_ibp(&self) -> bool {
        false
    }

    fn evaluate(&self, w: &WeightTensor, target: Supervision<'_>, _cfg: &IbpConfig) -> Result<LossOutput> {
        match target {
            Supervision::Partial(mask) => partial_nll_loss(w, mask),
            Supervision::Full(_) => Err(wrong(self.name(), self.supervision())),
        }
    }
}

impl StructuredLoss for PartialFenchelYoung {
    fn name(&self) -> &'static str {
        "partial-fy"
    }

    fn supervision(&self) -> SupervisionKind {
        SupervisionKind::Partial
    }

    fn uses_ibp(&self) -> bool {
        true
    }

    fn evaluate(&self, w: &WeightTensor, target: Supervision<'_>, cfg: &IbpConfig) -> Result<LossOutput> {
        match target {
            Supervision::Partial(mask) => partial_fy_loss(w, mask, cfg),
            Supervision::Full(_) => Err(wrong(self.name(), self.supervision())),
        }
    }
}

pub struct LossRegistry {
    losses: BTreeMap<&'static str, Box<dyn StructuredLoss>>,
}

impl Default for LossRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

impl LossRegistry {
    pub fn empty() -> Self {
        Self {
            losses: BTreeMap::new(),
        }
    }

    /// `nll`, `fy`, `partial-nll` and `partial-fy`.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Nll);
        r.register(FenchelYoung);
        r.register(PartialNll);
        r.register(PartialFenchelYoung);
        r
    }

    pub fn register<L: StructuredLoss + 'static>(&mut self, loss: L) {
        self.losses.insert(loss.name(), Box::new(loss));
    }

    pub fn get(&self, name: &str) -> Result<&dyn StructuredLoss> {
        self.losses
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown loss `{name}` (known: {})", self.names().join(", "))))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.losses.keys().copied().collect()
    }
}
