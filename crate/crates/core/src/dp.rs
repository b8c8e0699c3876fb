//! Exact inference by dynamic programming over the trellis.
//!
//! One recursion covers both Viterbi and the forward algorithm; they differ
//! only in the regularized max applied at each stage ([`RegChoice`]).
//! Charts are kept in the log domain in 64-bit floats.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::logspace::{self, NEG_INF};
use crate::tagging::{argmax, validate_reachability, MarginalTensor, TagSequence, WeightTensor};

/// Regularizer of the stage-wise max.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegChoice {
    /// Unregularized max (Viterbi).
    Hard,
    /// Entropy-regularized max, i.e. logsumexp (forward algorithm).
    Entropy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegMax {
    pub value: f64,
    /// Maximizing distribution over the inputs.
    pub weights: Vec<f64>,
}

/// Regularized max of `v` together with its argmax distribution.
///
/// `Hard` returns a one-hot vector at the lowest maximizing index, `Entropy`
/// returns the softmax.
pub fn reg_max(v: &[f64], reg: RegChoice) -> Result<RegMax> {
    let best = argmax(v).ok_or(Error::EmptyMax)?;
    let max = v[best];
    if max == NEG_INF {
        return Err(Error::EmptyMax);
    }
    match reg {
        RegChoice::Hard => {
            let mut weights = vec![0.0; v.len()];
            weights[best] = 1.0;
            Ok(RegMax { value: max, weights })
        }
        RegChoice::Entropy => {
            let value = logspace::logsumexp(v);
            let weights = v.iter().map(|&x| (x - value).exp()).collect();
            Ok(RegMax { value, weights })
        }
    }
}

#[inline]
fn reg_value(v: &[f64], reg: RegChoice) -> f64 {
    match reg {
        RegChoice::Hard => v.iter().copied().fold(NEG_INF, f64::max),
        RegChoice::Entropy => logspace::logsumexp(v),
    }
}

/// Chart values `c[i, t]` for one position.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartRow {
    pub stage: usize,
    pub values: Vec<f64>,
}

/// `next[u] = max_reg_t(prev[t] + block[t, u])`.
#[inline]
fn forward_step(prev: &[f64], block: &[f64], next: &mut [f64], scratch: &mut [f64], reg: RegChoice) {
    let t = prev.len();
    for (u, out) in next.iter_mut().enumerate() {
        for from in 0..t {
            scratch[from] = prev[from] + block[from * t + u];
        }
        *out = reg_value(scratch, reg);
    }
}

/// `next[t] = max_reg_u(block[t, u] + prev[u])`.
#[inline]
fn backward_step(prev: &[f64], block: &[f64], next: &mut [f64], scratch: &mut [f64], reg: RegChoice) {
    let t = prev.len();
    for (from, out) in next.iter_mut().enumerate() {
        let row = &block[from * t..(from + 1) * t];
        for to in 0..t {
            scratch[to] = row[to] + prev[to];
        }
        *out = reg_value(scratch, reg);
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

/// Forward chart: row 0 is all zeros, row `i + 1` aggregates row `i` through slice `i`.
pub fn forward_chart(w: &WeightTensor, reg: RegChoice) -> Result<Vec<ChartRow>> {
    ensure_reachable(w)?;
    Ok(forward_rows(w, reg)
        .into_iter()
        .enumerate()
        .map(|(stage, values)| ChartRow { stage, values })
        .collect())
}

fn forward_rows(w: &WeightTensor, reg: RegChoice) -> Vec<Vec<f64>> {
    let shape = w.shape();
    let t = shape.num_tags();
    let mut rows = Vec::with_capacity(shape.len());
    rows.push(vec![0.0; t]);
    let mut scratch = vec![0.0; t];
    for i in 0..shape.num_slices() {
        let mut next = vec![0.0; t];
        forward_step(&rows[i], w.slice(i), &mut next, &mut scratch, reg);
        rows.push(next);
    }
    rows
}

/// Backward chart: row `n - 1` is all zeros.
fn backward_rows(w: &WeightTensor, reg: RegChoice) -> Vec<Vec<f64>> {
    let shape = w.shape();
    let t = shape.num_tags();
    let n = shape.len();
    let mut rows = vec![vec![0.0; t]; n];
    let mut scratch = vec![0.0; t];
    for i in (0..shape.num_slices()).rev() {
        let (head, tail) = rows.split_at_mut(i + 1);
        backward_step(&tail[0], w.slice(i), &mut head[i], &mut scratch, reg);
    }
    rows
}

/// Reads the lexicographically smallest optimal path off a hard backward chart.
fn decode_from_backward(w: &WeightTensor, beta: &[Vec<f64>]) -> (TagSequence, f64) {
    let shape = w.shape();
    let t = shape.num_tags();
    let score = beta[0].iter().copied().fold(NEG_INF, f64::max);
    let mut tags = Vec::with_capacity(shape.len());
    tags.push(argmax(&beta[0]).expect("non-empty tag set"));
    let mut scratch = vec![0.0; t];
    for i in 0..shape.num_slices() {
        let from = tags[i];
        let row = &w.slice(i)[from * t..(from + 1) * t];
        for to in 0..t {
            scratch[to] = row[to] + beta[i + 1][to];
        }
        tags.push(argmax(&scratch).expect("non-empty tag set"));
    }
    (TagSequence::new(tags), score)
}

/// Highest-scoring labeling and its score. Ties go to the lexicographically
/// smallest labeling.
pub fn viterbi(w: &WeightTensor) -> Result<(TagSequence, f64)> {
    ensure_reachable(w)?;
    let beta = backward_rows(w, RegChoice::Hard);
    Ok(decode_from_backward(w, &beta))
}

/// Log-partition function `A_Y(w)`.
pub fn forward_log_z(w: &WeightTensor) -> Result<f64> {
    ensure_reachable(w)?;
    let rows = forward_rows(w, RegChoice::Entropy);
    Ok(reg_value(rows.last().expect("n >= 3"), RegChoice::Entropy))
}

/// Transition marginals `Pr[x_i = t, x_{i+1} = t']` by forward-backward.
pub fn crf_marginals(w: &WeightTensor) -> Result<MarginalTensor> {
    ensure_reachable(w)?;
    let shape = w.shape();
    let t = shape.num_tags();
    let alpha = forward_rows(w, RegChoice::Entropy);
    let beta = backward_rows(w, RegChoice::Entropy);
    let log_z = logspace::logsumexp(&alpha[shape.len() - 1]);
    let mut values = vec![0.0; shape.num_arcs()];
    for i in 0..shape.num_slices() {
        let block = w.slice(i);
        let out = &mut values[i * t * t..(i + 1) * t * t];
        for from in 0..t {
            for to in 0..t {
                let k = from * t + to;
                out[k] = (alpha[i][from] + block[k] + beta[i + 1][to] - log_z).exp();
            }
        }
    }
    MarginalTensor::new(shape, values)
}

/// Pad block for stages beyond an instance's length: every tag moves to tag 0
/// with weight 0, all other arcs forbidden.
fn pad_block(num_tags: usize) -> Vec<f64> {
    let mut block = vec![NEG_INF; num_tags * num_tags];
    for from in 0..num_tags {
        block[from * num_tags] = 0.0;
    }
    block
}

struct Batch<'a> {
    items: Vec<(usize, &'a WeightTensor)>,
    num_tags: usize,
    max_len: usize,
}

/// Splits a batch into runnable items and per-item errors.
fn prepare_batch<'a, T>(ws: &'a [WeightTensor], results: &mut [Option<Result<T>>]) -> Batch<'a> {
    let mut items = Vec::new();
    let mut num_tags = None;
    for (k, w) in ws.iter().enumerate() {
        if let Err(e) = ensure_reachable(w) {
            results[k] = Some(Err(e));
            continue;
        }
        let shape = w.shape();
        match num_tags {
            None => num_tags = Some(shape.num_tags()),
            Some(t) if t != shape.num_tags() => {
                results[k] = Some(Err(Error::ShapeMismatch {
                    expected: format!("{t} tags"),
                    found: format!("{} tags", shape.num_tags()),
                }));
                continue;
            }
            Some(_) => {}
        }
        items.push((k, w));
    }
    let max_len = items.iter().map(|(_, w)| w.shape().len()).max().unwrap_or(0);
    Batch {
        items,
        num_tags: num_tags.unwrap_or(1),
        max_len,
    }
}

fn block_at<'a>(w: &'a WeightTensor, stage: usize, pad: &'a [f64]) -> &'a [f64] {
    if stage < w.shape().num_slices() {
        w.slice(stage)
    } else {
        pad
    }
}

/// Wavefront forward pass over a batch of instances of possibly different lengths.
///
/// Stages run in sequence; within a stage every (instance, tag) cell is
/// independent and computed by a parallel map. Results match
/// [`forward_log_z`] bit for bit.
pub fn batched_forward(ws: &[WeightTensor]) -> Vec<Result<f64>> {
    let mut results: Vec<Option<Result<f64>>> = vec![None; ws.len()];
    let batch = prepare_batch(ws, &mut results);
    let t = batch.num_tags;
    let pad = pad_block(t);
    let b = batch.items.len();
    let mut rows = vec![0.0; b * t];
    let mut next = vec![0.0; b * t];
    for stage in 0..batch.max_len.saturating_sub(1) {
        next.par_chunks_mut(t)
            .zip(rows.par_chunks(t))
            .zip(batch.items.par_iter())
            .for_each_init(
                || vec![0.0; t],
                |scratch, ((out, prev), (_, w))| {
                    forward_step(prev, block_at(w, stage, &pad), out, scratch, RegChoice::Entropy);
                },
            );
        std::mem::swap(&mut rows, &mut next);
    }
    for (row, (k, _)) in rows.chunks(t).zip(&batch.items) {
        results[*k] = Some(Ok(reg_value(row, RegChoice::Entropy)));
    }
    results.into_iter().map(|r| r.expect("every item resolved")).collect()
}

/// Wavefront Viterbi over a batch; matches [`viterbi`] bit for bit.
pub fn batched_viterbi(ws: &[WeightTensor]) -> Vec<Result<(TagSequence, f64)>> {
    let mut results: Vec<Option<Result<(TagSequence, f64)>>> = vec![None; ws.len()];
    let batch = prepare_batch(ws, &mut results);
    let t = batch.num_tags;
    let pad = pad_block(t);
    let b = batch.items.len();
    let n = batch.max_len;
    // charts[stage][item * t + tag]
    let mut charts = vec![vec![0.0; b * t]; n];
    for stage in (0..n.saturating_sub(1)).rev() {
        let (head, tail) = charts.split_at_mut(stage + 1);
        head[stage]
            .par_chunks_mut(t)
            .zip(tail[0].par_chunks(t))
            .zip(batch.items.par_iter())
            .for_each_init(
                || vec![0.0; t],
                |scratch, ((out, prev), (_, w))| {
                    backward_step(prev, block_at(w, stage, &pad), out, scratch, RegChoice::Hard);
                },
            );
    }
    let decoded: Vec<(usize, (TagSequence, f64))> = batch
        .items
        .par_iter()
        .enumerate()
        .map(|(j, (k, w))| {
            let beta: Vec<Vec<f64>> = (0..w.shape().len())
                .map(|stage| charts[stage][j * t..(j + 1) * t].to_vec())
                .collect();
            (*k, decode_from_backward(w, &beta))
        })
        .collect();
    for (k, out) in decoded {
        results[k] = Some(Ok(out));
    }
    results.into_iter().map(|r| r.expect("every item resolved")).collect()
}

/// Per-instance forward-backward marginals, parallel over the batch.
pub fn batched_marginals(ws: &[WeightTensor]) -> Vec<Result<MarginalTensor>> {
    ws.par_iter().map(crf_marginals).collect()
}
