//! Minibatch SGD over the registered losses.

use std::time::Instant;

use bcrf_core::ibp::{IbpConfig, DEFAULT_SWEEPS, DEFAULT_TAU_INVERSE};
use bcrf_core::losses::{LossRegistry, StructuredLoss, Supervision, SupervisionKind};
use bcrf_core::tagging::{encode_sequence, SufficientStats, TagSequence, TransitionMask};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::decode::{decode_all, DecodeOptions, DecoderRegistry};
use crate::error::{CliError, Result};
use crate::metrics::token_accuracy;
use crate::model::Model;
use crate::scorer::{label_mask, EncodedSentence, LinearScorer, ScorerGrad, StructuralMask};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Decoder used for dev accuracy.
    pub inference: String,
    pub loss: String,
    /// IBP sweeps (training and decoding) and mean-field updates.
    pub iters: usize,
    /// Decoding temperature.
    pub tau_inverse: f64,
    /// Temperature of the IBP-based losses.
    pub train_tau_inverse: f64,
    pub seed: u64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub repair: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            inference: "crf".into(),
            loss: "nll".into(),
            iters: DEFAULT_SWEEPS,
            tau_inverse: DEFAULT_TAU_INVERSE,
            train_tau_inverse: 1.0,
            seed: 0,
            lr: 0.1,
            epochs: 10,
            batch_size: 16,
            repair: false,
        }
    }
}

impl RunConfig {
    pub fn decode_options(&self) -> DecodeOptions {
        DecodeOptions {
            tau_inverse: self.tau_inverse,
            iters: self.iters,
            repair: self.repair,
        }
    }

    pub fn loss_config(&self) -> IbpConfig {
        IbpConfig::training()
            .with_tau_inverse(self.train_tau_inverse)
            .with_iters(self.iters)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(CliError::Conflict(format!("learning rate must be finite and >= 0, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(CliError::Conflict("batch size must be positive".into()));
        }
        self.loss_config().validate()?;
        IbpConfig::decoding()
            .with_tau_inverse(self.tau_inverse)
            .with_iters(self.iters)
            .validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean training loss over the epoch, at the parameters before each step.
    pub loss: f64,
    pub dev_acc: Option<f64>,
    pub wall_ms: u128,
}

enum Target {
    Full(SufficientStats),
    Partial(TransitionMask),
}

impl Target {
    fn supervision(&self) -> Supervision<'_> {
        match self {
            Target::Full(y) => Supervision::Full(y),
            Target::Partial(m) => Supervision::Partial(m),
        }
    }
}

fn targets(loss: &dyn StructuredLoss, data: &Dataset) -> Result<Vec<Target>> {
    match loss.supervision() {
        SupervisionKind::Full => data
            .records
            .iter()
            .map(|r| {
                let gold = r.gold().ok_or_else(|| {
                    CliError::Conflict(format!(
                        "loss `{}` needs fully labeled data; use partial-nll or partial-fy",
                        loss.name()
                    ))
                })?;
                let shape = bcrf_core::tagging::ProblemShape::new(r.len(), data.num_tags())?;
                Ok(Target::Full(encode_sequence(shape, &TagSequence::new(gold))?))
            })
            .collect(),
        SupervisionKind::Partial => {
            if data.is_fully_labeled() {
                return Err(CliError::Conflict(format!(
                    "loss `{}` needs partially labeled data (`A|B` or `*` markers)",
                    loss.name()
                )));
            }
            data.records
                .iter()
                .map(|r| Ok(Target::Partial(label_mask(r, data.num_tags())?)))
                .collect()
        }
    }
}

/// A zero scorer for `data`, with BIES constraints if `bies` is set.
pub fn init_model(data: &Dataset, bies: bool) -> Result<Model> {
    let mut scorer = LinearScorer::zeros(data.num_tags(), data.tokens.len()).with_bos(data.bos_tag());
    if bies {
        scorer = scorer.with_mask(StructuralMask::bies(&data.tags)?);
    }
    Ok(Model {
        tags: data.tags.clone(),
        tokens: data.tokens.clone(),
        scorer,
    })
}

/// Trains `model` in place. `on_epoch` sees each epoch's metrics as they are produced.
pub fn train(
    cfg: &RunConfig,
    model: &mut Model,
    train_data: &Dataset,
    dev: Option<&Dataset>,
    mut on_epoch: impl FnMut(&EpochMetrics) -> Result<()>,
) -> Result<Vec<EpochMetrics>> {
    cfg.validate()?;
    let losses = LossRegistry::standard();
    let loss = losses.get(&cfg.loss)?;
    let decoders = DecoderRegistry::standard();
    let decoder = decoders.get(&cfg.inference)?;
    decoder.check(&model.scorer)?;
    if train_data.tags != model.tags {
        return Err(CliError::Conflict("training data and model use different tag sets".into()));
    }
    let targets = targets(loss, train_data)?;
    let sentences: Vec<EncodedSentence> = train_data
        .records
        .iter()
        .map(|r| EncodedSentence::new(r, &model.tokens))
        .collect();
    let dev_sentences: Option<Vec<EncodedSentence>> =
        dev.map(|d| d.records.iter().map(|r| EncodedSentence::new(r, &model.tokens)).collect());
    let loss_cfg = cfg.loss_config();
    let opts = cfg.decode_options();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let scorer = &model.scorer;
            let outputs: Vec<_> = batch
                .par_iter()
                .map(|&k| {
                    let w = scorer.score_sentence(&sentences[k])?;
                    Ok(loss.evaluate(&w, targets[k].supervision(), &loss_cfg)?)
                })
                .collect::<Result<_>>()?;
            let mut grad = ScorerGrad::zeros(scorer);
            let scale = 1.0 / batch.len() as f64;
            for (&k, out) in batch.iter().zip(&outputs) {
                total += out.value;
                scorer.accumulate(&sentences[k], &out.grad, scale, &mut grad);
            }
            model.scorer.step(&grad, cfg.lr);
        }
        let dev_acc = match (dev, &dev_sentences) {
            (Some(d), Some(s)) => Some(token_accuracy(d, &decode_all(decoder, &model.scorer, s, &opts)?)),
            _ => None,
        };
        let m = EpochMetrics {
            epoch,
            loss: total / sentences.len().max(1) as f64,
            dev_acc,
            wall_ms: start.elapsed().as_millis(),
        };
        on_epoch(&m)?;
        log.push(m);
    }
    Ok(log)
}

/// Loss of one sentence under `scorer`, for descent checks.
pub fn sentence_loss(cfg: &RunConfig, scorer: &LinearScorer, data: &Dataset, index: usize) -> Result<f64> {
    let losses = LossRegistry::standard();
    let loss = losses.get(&cfg.loss)?;
    let sub = Dataset {
        records: vec![data.records[index].clone()],
        tags: data.tags.clone(),
        tokens: data.tokens.clone(),
    };
    let target = targets(loss, &sub)?.remove(0);
    let w = scorer.score_sentence(&EncodedSentence::new(&data.records[index], &data.tokens))?;
    Ok(loss.evaluate(&w, target.supervision(), &cfg.loss_config())?.value)
}
