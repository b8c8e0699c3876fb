//! Synthetic corpora drawn from fixed random hidden Markov models.

use std::ops::RangeInclusive;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;

use crate::data::{Dataset, Label, Record, Vocab};

/// Dirichlet concentration for every row of the generating models.
pub const CONCENTRATION: f64 = 0.3;

fn dirichlet(rng: &mut impl Rng, dim: usize, alpha: f64) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("positive concentration");
    loop {
        let g: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
        let total: f64 = g.iter().sum();
        if total > 0.0 {
            return g.into_iter().map(|x| x / total).collect();
        }
    }
}

fn categorical(rows: &[Vec<f64>]) -> Vec<WeightedIndex<f64>> {
    rows.iter()
        .map(|r| WeightedIndex::new(r).expect("a Dirichlet draw has positive mass"))
        .collect()
}

fn token_name(k: usize) -> String {
    format!("w{k}")
}

#[derive(Debug, Clone)]
pub struct Hmm {
    pub transitions: Vec<Vec<f64>>,
    pub emissions: Vec<Vec<f64>>,
}

impl Hmm {
    /// Row-stochastic tables drawn from a symmetric Dirichlet; uniform start.
    pub fn random(rng: &mut impl Rng, num_tags: usize, vocab_size: usize, concentration: f64) -> Self {
        Self {
            transitions: (0..num_tags).map(|_| dirichlet(rng, num_tags, concentration)).collect(),
            emissions: (0..num_tags).map(|_| dirichlet(rng, vocab_size, concentration)).collect(),
        }
    }

    /// Tag and token ids of one sentence.
    pub fn sample(&self, rng: &mut impl Rng, len: usize) -> (Vec<usize>, Vec<usize>) {
        let trans = categorical(&self.transitions);
        let emit = categorical(&self.emissions);
        self.sample_with(rng, len, &trans, &emit)
    }

    fn sample_with(
        &self,
        rng: &mut impl Rng,
        len: usize,
        trans: &[WeightedIndex<f64>],
        emit: &[WeightedIndex<f64>],
    ) -> (Vec<usize>, Vec<usize>) {
        let mut tags = Vec::with_capacity(len);
        let mut tokens = Vec::with_capacity(len);
        let mut tag = rng.random_range(0..self.transitions.len());
        for k in 0..len {
            if k > 0 {
                tag = trans[tag].sample(rng);
            }
            tags.push(tag);
            tokens.push(emit[tag].sample(rng));
        }
        (tags, tokens)
    }
}

fn dataset_from(sentences: Vec<(Vec<usize>, Vec<usize>)>, tag_names: Vec<String>) -> Dataset {
    let tags = Vocab::from(tag_names);
    let mut tokens = Vocab::tokens();
    let records = sentences
        .into_iter()
        .map(|(tag_ids, token_ids)| {
            let words: Vec<String> = token_ids.iter().map(|&k| token_name(k)).collect();
            for w in &words {
                tokens.insert(w);
            }
            Record {
                tokens: words,
                labels: tag_ids.into_iter().map(Label::Gold).collect(),
                padding: 0,
            }
        })
        .collect();
    Dataset { records, tags, tokens }
}

/// `count` sentences from one HMM fixed by `seed`. Tags are `T0..`, tokens `w0..`.
///
/// The sentences are a prefix-stable stream: generating more sentences with
/// the same seed extends the list without changing the earlier ones.
pub fn synth_generate(
    seed: u64,
    lengths: RangeInclusive<usize>,
    num_tags: usize,
    vocab_size: usize,
    count: usize,
) -> Dataset {
    assert!(*lengths.start() >= 1 && !lengths.is_empty(), "empty length range");
    let mut model_rng = ChaCha8Rng::seed_from_u64(seed);
    let hmm = Hmm::random(&mut model_rng, num_tags, vocab_size, CONCENTRATION);
    let trans = categorical(&hmm.transitions);
    let emit = categorical(&hmm.emissions);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_5e17);
    let sentences = (0..count)
        .map(|_| {
            let len = rng.random_range(lengths.clone());
            hmm.sample_with(&mut rng, len, &trans, &emit)
        })
        .collect();
    dataset_from(sentences, (0..num_tags).map(|t| format!("T{t}")).collect())
}

/// BIES segmentation task with `num_types` segment types (`4 * num_types` tags).
///
/// Segment types follow a random Markov chain, segment lengths a per-type
/// distribution over 1..=4, and each tag emits tokens from its own Dirichlet
/// row. Tags are ordered `B-Kj, I-Kj, E-Kj, S-Kj` for each type `j`.
pub fn synth_bies(
    seed: u64,
    lengths: RangeInclusive<usize>,
    num_types: usize,
    vocab_size: usize,
    count: usize,
) -> Dataset {
    assert!(*lengths.start() >= 1 && !lengths.is_empty(), "empty length range");
    let mut model_rng = ChaCha8Rng::seed_from_u64(seed);
    let type_trans = categorical(
        &(0..num_types)
            .map(|_| dirichlet(&mut model_rng, num_types, 1.0))
            .collect::<Vec<_>>(),
    );
    let seg_len = categorical(
        &(0..num_types)
            .map(|_| dirichlet(&mut model_rng, 4, 1.0))
            .collect::<Vec<_>>(),
    );
    let emit = categorical(
        &(0..4 * num_types)
            .map(|_| dirichlet(&mut model_rng, vocab_size, CONCENTRATION))
            .collect::<Vec<_>>(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00b1_e50f_5e17);
    let mut sentences = Vec::with_capacity(count);
    for _ in 0..count {
        let len = rng.random_range(lengths.clone());
        let mut tags = Vec::with_capacity(len);
        let mut kind = rng.random_range(0..num_types);
        let mut first = true;
        while tags.len() < len {
            if !first {
                kind = type_trans[kind].sample(&mut rng);
            }
            first = false;
            let l = (seg_len[kind].sample(&mut rng) + 1).min(len - tags.len());
            let base = 4 * kind;
            if l == 1 {
                tags.push(base + 3);
            } else {
                tags.push(base);
                tags.extend(std::iter::repeat_n(base + 1, l - 2));
                tags.push(base + 2);
            }
        }
        let tokens = tags.iter().map(|&t| emit[t].sample(&mut rng)).collect();
        sentences.push((tags, tokens));
    }
    let names = (0..num_types)
        .flat_map(|j| ["B", "I", "E", "S"].map(|p| format!("{p}-K{j}")))
        .collect();
    dataset_from(sentences, names)
}

/// Partial supervision in the style of several annotators each skipping one
/// tag group.
///
/// Tag 0 plays the role of the default tag. Record `r` belongs to subset
/// `r % subsets`; in subset `j` the tags `h >= 1` with `(h - 1) % subsets == j`
/// are unannotated, so positions whose gold tag is 0 or unannotated only know
/// that their tag is one of those.
pub fn partial_view(data: &Dataset, subsets: usize) -> Dataset {
    let t = data.num_tags();
    let records = data
        .records
        .iter()
        .enumerate()
        .map(|(r, rec)| {
            let j = r % subsets;
            let hidden: Vec<usize> = std::iter::once(0).chain((1..t).filter(|h| (h - 1) % subsets == j)).collect();
            let labels = rec
                .labels
                .iter()
                .enumerate()
                .map(|(k, l)| match l.gold() {
                    Some(g) if k >= rec.padding && hidden.contains(&g) && hidden.len() > 1 => {
                        Label::OneOf(hidden.clone())
                    }
                    _ => l.clone(),
                })
                .collect();
            Record {
                tokens: rec.tokens.clone(),
                labels,
                padding: rec.padding,
            }
        })
        .collect();
    Dataset {
        records,
        tags: data.tags.clone(),
        tokens: data.tokens.clone(),
    }
}
