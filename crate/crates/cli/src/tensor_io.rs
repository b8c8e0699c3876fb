//! The `wtensor v1` text format.
//!
//! ```text
//! wtensor v1 <n> <num_tags>
//! <i> <t> <t'> <value>      ((n-1) * num_tags^2 lines, row-major)
//! ```
//!
//! Indices are 0-based. Values use the shortest decimal that round-trips,
//! and `-inf` for forbidden arcs. A file may hold several tensors in a row.

use std::fmt::Write as _;

use bcrf_core::tagging::ProblemShape;

use crate::error::{CliError, Result};

pub const HEADER: &str = "wtensor v1";

/// Appends one tensor to `out`.
pub fn write_tensor(out: &mut String, shape: ProblemShape, values: &[f64]) {
    let t = shape.num_tags();
    writeln!(out, "{HEADER} {} {t}", shape.len()).unwrap();
    for (idx, v) in values.iter().enumerate() {
        let (i, from, to) = shape.unindex(idx);
        writeln!(out, "{i} {from} {to} {v}").unwrap();
    }
}

/// All tensors in `text`, as shapes with row-major values.
pub fn read_tensors(text: &str, source: &str) -> Result<Vec<(ProblemShape, Vec<f64>)>> {
    let mut out = Vec::new();
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
    while let Some((lineno, line)) = lines.next() {
        if line.is_empty() {
            continue;
        }
        let err = |l: usize, m: String| CliError::format(source, l, m);
        let rest = line
            .strip_prefix(HEADER)
            .ok_or_else(|| err(lineno, format!("expected `{HEADER} <n> <num_tags>`")))?;
        let dims: Vec<usize> = rest
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| err(lineno, format!("bad dimension: {e}")))?;
        let [n, t] = dims[..] else {
            return Err(err(lineno, "header needs exactly two dimensions".into()));
        };
        let shape = ProblemShape::new(n, t).map_err(|e| err(lineno, e.to_string()))?;
        let mut values = Vec::with_capacity(shape.num_arcs());
        for idx in 0..shape.num_arcs() {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| err(lineno, format!("tensor ends after {idx} of {} entries", shape.num_arcs())))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [i, from, to, v] = fields[..] else {
                return Err(err(lineno, "expected `i t t' value`".into()));
            };
            let (ei, ef, et) = shape.unindex(idx);
            let found = [i, from, to].map(|s| s.parse::<usize>().ok());
            if found != [Some(ei), Some(ef), Some(et)] {
                return Err(err(lineno, format!("expected entry `{ei} {ef} {et}`")));
            }
            let v: f64 = v.parse().map_err(|e| err(lineno, format!("bad value `{v}`: {e}")))?;
            if v.is_nan() || v == f64::INFINITY {
                return Err(err(lineno, format!("value `{v}` is not allowed")));
            }
            values.push(v);
        }
        out.push((shape, values));
    }
    Ok(out)
}
