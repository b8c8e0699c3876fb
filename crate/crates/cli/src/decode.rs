//! Decoders selectable by name.

use std::collections::BTreeMap;

use bcrf_core::dp::{crf_marginals, viterbi};
use bcrf_core::ibp::{ibp_infer, mbr_decode, IbpConfig, DEFAULT_SWEEPS, DEFAULT_TAU_INVERSE};
use bcrf_core::logspace;
use bcrf_core::mean_field::{mf_infer, FactorizedDistribution};
use bcrf_core::tagging::{argmax, MarginalTensor, ProblemShape};
use rayon::prelude::*;

use crate::error::{CliError, Result};
use crate::scorer::{EncodedSentence, LinearScorer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeOptions {
    pub tau_inverse: f64,
    /// IBP sweeps or mean-field updates.
    pub iters: usize,
    /// Replace MBR outputs that use a forbidden transition by the best valid path.
    pub repair: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            tau_inverse: DEFAULT_TAU_INVERSE,
            iters: DEFAULT_SWEEPS,
            repair: false,
        }
    }
}

impl DecodeOptions {
    fn ibp(&self) -> IbpConfig {
        IbpConfig::decoding()
            .with_tau_inverse(self.tau_inverse)
            .with_iters(self.iters)
    }
}

pub trait Decoder: Send + Sync {
    fn name(&self) -> &'static str;

    /// Fails early for scorers this decoder cannot represent.
    fn check(&self, _scorer: &LinearScorer) -> Result<()> {
        Ok(())
    }

    fn decode(&self, scorer: &LinearScorer, sentence: &EncodedSentence, opts: &DecodeOptions) -> Result<Vec<usize>>;

    /// Arc marginals of the decoder's inference procedure.
    fn marginals(&self, scorer: &LinearScorer, sentence: &EncodedSentence, opts: &DecodeOptions)
        -> Result<MarginalTensor>;
}

pub struct Crf;
pub struct Bcrf;
pub struct MeanField;
pub struct Unstructured;

impl Decoder for Crf {
    fn name(&self) -> &'static str {
        "crf"
    }

    fn decode(&self, scorer: &LinearScorer, sentence: &EncodedSentence, _: &DecodeOptions) -> Result<Vec<usize>> {
        let w = scorer.score_sentence(sentence)?;
        Ok(viterbi(&w)?.0.into_tags())
    }

    fn marginals(&self, scorer: &LinearScorer, sentence: &EncodedSentence, _: &DecodeOptions) -> Result<MarginalTensor> {
        Ok(crf_marginals(&scorer.score_sentence(sentence)?)?)
    }
}

impl Decoder for Bcrf {
    fn name(&self) -> &'static str {
        "bcrf"
    }

    fn decode(&self, scorer: &LinearScorer, sentence: &EncodedSentence, opts: &DecodeOptions) -> Result<Vec<usize>> {
        let w = scorer.score_sentence(sentence)?;
        Ok(mbr_decode(&w, &opts.ibp(), opts.repair)?.into_tags())
    }

    fn marginals(&self, scorer: &LinearScorer, sentence: &EncodedSentence, opts: &DecodeOptions) -> Result<MarginalTensor> {
        let w = scorer.score_sentence(sentence)?;
        Ok(ibp_infer(&w, &opts.ibp())?.0)
    }
}

fn mean_field_conflict() -> CliError {
    CliError::Conflict("mean field cannot represent the structural constraints of this model".into())
}

fn product_marginals(shape: ProblemShape, probs: &[Vec<f64>]) -> Result<MarginalTensor> {
    let values = (0..shape.num_arcs())
        .map(|idx| {
            let (i, from, to) = shape.unindex(idx);
            probs[i][from] * probs[i + 1][to]
        })
        .collect();
    Ok(MarginalTensor::new(shape, values)?)
}

impl MeanField {
    fn infer(scorer: &LinearScorer, sentence: &EncodedSentence, opts: &DecodeOptions) -> Result<FactorizedDistribution> {
        let w = scorer.score_sentence(sentence)?;
        let shape = w.shape();
        Ok(mf_infer(&w, opts.iters, FactorizedDistribution::uniform(shape.len(), shape.num_tags()))?)
    }
}

impl Decoder for MeanField {
    fn name(&self) -> &'static str {
        "mf"
    }

    fn check(&self, scorer: &LinearScorer) -> Result<()> {
        if scorer.has_constraints() {
            return Err(mean_field_conflict());
        }
        Ok(())
    }

    fn decode(&self, scorer: &LinearScorer, sentence: &EncodedSentence, opts: &DecodeOptions) -> Result<Vec<usize>> {
        self.check(scorer)?;
        Ok(Self::infer(scorer, sentence, opts)?.argmax().into_tags())
    }

    fn marginals(&self, scorer: &LinearScorer, sentence: &EncodedSentence, opts: &DecodeOptions) -> Result<MarginalTensor> {
        self.check(scorer)?;
        let r = Self::infer(scorer, sentence, opts)?;
        product_marginals(scorer.shape(sentence)?, r.probs())
    }
}

impl Decoder for Unstructured {
    fn name(&self) -> &'static str {
        "unstructured"
    }

    fn decode(&self, scorer: &LinearScorer, sentence: &EncodedSentence, _: &DecodeOptions) -> Result<Vec<usize>> {
        Ok(scorer.unstructured_decode(sentence))
    }

    /// Products of per-position softmaxes of the emission scores.
    fn marginals(&self, scorer: &LinearScorer, sentence: &EncodedSentence, _: &DecodeOptions) -> Result<MarginalTensor> {
        let probs: Vec<Vec<f64>> = sentence
            .ids
            .iter()
            .map(|&tok| {
                let s: Vec<f64> = (0..scorer.num_tags).map(|t| scorer.emission(tok, t)).collect();
                let z = logspace::logsumexp(&s);
                s.iter().map(|x| (x - z).exp()).collect()
            })
            .collect();
        debug_assert!(probs.iter().all(|p| argmax(p).is_some()));
        product_marginals(scorer.shape(sentence)?, &probs)
    }
}

pub struct DecoderRegistry {
    decoders: BTreeMap<&'static str, Box<dyn Decoder>>,
}

impl DecoderRegistry {
    pub fn empty() -> Self {
        Self {
            decoders: BTreeMap::new(),
        }
    }

    /// `crf`, `bcrf`, `mf` and `unstructured`.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Crf);
        r.register(Bcrf);
        r.register(MeanField);
        r.register(Unstructured);
        r
    }

    pub fn register<D: Decoder + 'static>(&mut self, decoder: D) {
        self.decoders.insert(decoder.name(), Box::new(decoder));
    }

    pub fn get(&self, name: &str) -> Result<&dyn Decoder> {
        self.decoders.get(name).map(|d| d.as_ref()).ok_or_else(|| {
            CliError::Conflict(format!("unknown decoder `{name}` (expected one of {})", self.names().join(", ")))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.decoders.keys().copied().collect()
    }
}

impl Default for DecoderRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

/// Decodes every sentence in parallel; output order follows the input.
pub fn decode_all(
    decoder: &dyn Decoder,
    scorer: &LinearScorer,
    sentences: &[EncodedSentence],
    opts: &DecodeOptions,
) -> Result<Vec<Vec<usize>>> {
    decoder.check(scorer)?;
    sentences.par_iter().map(|s| decoder.decode(scorer, s, opts)).collect()
}
