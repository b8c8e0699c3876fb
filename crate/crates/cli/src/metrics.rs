//! Evaluation metrics. Padding positions are never counted.

use crate::data::{Dataset, Vocab};

/// Fraction of gold-labeled tokens tagged correctly.
pub fn token_accuracy(data: &Dataset, predictions: &[Vec<usize>]) -> f64 {
    let mut correct = 0usize;
    let mut total = 0usize;
    for (rec, pred) in data.records.iter().zip(predictions) {
        for (label, &p) in rec.labels.iter().zip(pred).skip(rec.padding) {
            if let Some(g) = label.gold() {
                total += 1;
                correct += usize::from(g == p);
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

/// Well-formed BIES segments `(type, start, end)`; broken fragments are dropped.
pub fn bies_chunks(tags: &[usize], vocab: &Vocab) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    let mut open: Option<(&str, usize)> = None;
    for (k, &t) in tags.iter().enumerate() {
        let (prefix, kind) = vocab.name(t).split_once('-').unwrap_or(("", ""));
        match prefix {
            "S" => {
                out.push((kind.to_string(), k, k));
                open = None;
            }
            "B" => open = Some((kind, k)),
            "I" => {
                if open.is_none_or(|(ok, _)| ok != kind) {
                    open = None;
                }
            }
            "E" => {
                if let Some((ok, start)) = open.filter(|(ok, _)| *ok == kind) {
                    out.push((ok.to_string(), start, k));
                }
                open = None;
            }
            _ => open = None,
        }
    }
    out
}

/// Micro-averaged chunk F1 over fully labeled records.
pub fn chunk_f1(data: &Dataset, predictions: &[Vec<usize>]) -> f64 {
    let (mut tp, mut n_pred, mut n_gold) = (0usize, 0usize, 0usize);
    for (rec, pred) in data.records.iter().zip(predictions) {
        let Some(gold) = rec.gold() else { continue };
        let g = bies_chunks(&gold[rec.padding..], &data.tags);
        let p = bies_chunks(&pred[rec.padding..], &data.tags);
        tp += p.iter().filter(|c| g.contains(c)).count();
        n_pred += p.len();
        n_gold += g.len();
    }
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / n_pred as f64;
    let recall = tp as f64 / n_gold as f64;
    2.0 * precision * recall / (precision + recall)
}
