//! Wall-clock comparison of forward-backward, IBP and mean field on batches.

use std::fmt::Write as _;
use std::time::Instant;

use bcrf_core::dp::batched_marginals;
use bcrf_core::ibp::{batched_ibp, IbpConfig};
use bcrf_core::mean_field::{mf_infer, FactorizedDistribution};
use bcrf_core::tagging::{ProblemShape, WeightTensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;

/// Relative tolerance of the linearity checks.
pub const TREND_TOLERANCE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchConfig {
    pub lengths: Vec<usize>,
    pub tags: Vec<usize>,
    pub batches: Vec<usize>,
    pub ibp_iters: Vec<usize>,
    pub mf_iters: Vec<usize>,
    pub warmup: usize,
    pub reps: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            lengths: vec![32, 128, 512],
            tags: vec![8, 32],
            batches: vec![16, 64],
            ibp_iters: vec![5, 10],
            mf_iters: vec![5, 10],
            warmup: 1,
            reps: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Forward,
    Ibp(usize),
    Mf(usize),
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Forward => f.write_str("forward"),
            Method::Ibp(k) => write!(f, "ibp-k{k}"),
            Method::Mf(k) => write!(f, "mf-k{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub num_tags: usize,
    pub batch: usize,
    pub method: String,
    pub median_ms: f64,
    /// Forward median over this method's median.
    pub speedup: f64,
    pub samples_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendCheck {
    pub name: String,
    pub ratio: f64,
    pub expected: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub threads: usize,
    pub config: BenchConfig,
    pub rows: Vec<BenchRow>,
    pub trends: Vec<TrendCheck>,
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize, t: usize, batch: usize) -> Result<Vec<WeightTensor>> {
    let shape = ProblemShape::new(n, t)?;
    (0..batch)
        .map(|_| {
            let v = (0..shape.num_arcs()).map(|_| StandardNormal.sample(rng)).collect();
            Ok(WeightTensor::new(shape, v)?)
        })
        .collect()
}

/// Runs `method` once; the outputs are returned so they are dropped outside the timer.
fn run(method: Method, ws: &[WeightTensor]) -> Result<Vec<Vec<f64>>> {
    let out = match method {
        Method::Forward => batched_marginals(ws)
            .into_iter()
            .map(|r| r.map(|q| q.into_values()))
            .collect::<bcrf_core::Result<_>>()?,
        Method::Ibp(k) => {
            let cfg = IbpConfig::decoding().with_iters(k);
            batched_ibp(ws, &cfg)
                .into_iter()
                .map(|r| r.map(|q| q.into_values()))
                .collect::<bcrf_core::Result<_>>()?
        }
        Method::Mf(k) => ws
            .par_iter()
            .map(|w| {
                let s = w.shape();
                mf_infer(w, k, FactorizedDistribution::uniform(s.len(), s.num_tags()))
                    .map(|r| r.probs().concat())
            })
            .collect::<bcrf_core::Result<_>>()?,
    };
    Ok(out)
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Shortest timed sample; faster runs are repeated inside one sample.
pub const MIN_SAMPLE_MS: f64 = 20.0;

/// Per-run milliseconds, one value per repetition.
fn time(method: Method, ws: &[WeightTensor], warmup: usize, reps: usize) -> Result<Vec<f64>> {
    let start = Instant::now();
    drop(run(method, ws)?);
    let once = start.elapsed().as_secs_f64() * 1e3;
    let inner = (MIN_SAMPLE_MS / once.max(1e-3)).ceil().max(1.0) as usize;
    for _ in 0..warmup * inner {
        drop(run(method, ws)?);
    }
    (0..reps)
        .map(|_| {
            let mut ms = 0.0;
            for _ in 0..inner {
                let start = Instant::now();
                let out = run(method, ws)?;
                ms += start.elapsed().as_secs_f64() * 1e3;
                drop(out);
            }
            Ok(ms / inner as f64)
        })
        .collect()
}

/// Runs the grid on the current rayon pool.
pub fn bench(cfg: &BenchConfig) -> Result<BenchReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut methods = vec![Method::Forward];
    methods.extend(cfg.ibp_iters.iter().map(|&k| Method::Ibp(k)));
    methods.extend(cfg.mf_iters.iter().map(|&k| Method::Mf(k)));
    let reps = cfg.reps.max(1);
    let mut rows = Vec::new();
    for &n in &cfg.lengths {
        for &t in &cfg.tags {
            for &batch in &cfg.batches {
                let ws = random_batch(&mut rng, n, t, batch)?;
                let mut base = None;
                for &m in &methods {
                    let samples = time(m, &ws, cfg.warmup, reps)?;
                    let med = median(&samples);
                    let fwd = *base.get_or_insert(med);
                    rows.push(BenchRow {
                        n,
                        num_tags: t,
                        batch,
                        method: m.to_string(),
                        median_ms: med,
                        speedup: fwd / med,
                        samples_ms: samples,
                    });
                }
            }
        }
    }
    let trends = trends(&rows, cfg);
    Ok(BenchReport {
        threads: rayon::current_num_threads(),
        config: cfg.clone(),
        rows,
        trends,
    })
}

fn lookup<'a>(rows: &'a [BenchRow], n: usize, t: usize, b: usize, m: &str) -> Option<&'a BenchRow> {
    rows.iter()
        .find(|r| r.n == n && r.num_tags == t && r.batch == b && r.method == m)
}

fn check(name: String, ratio: f64, expected: f64) -> TrendCheck {
    TrendCheck {
        passed: (ratio / expected - 1.0).abs() <= TREND_TOLERANCE,
        name,
        ratio,
        expected,
    }
}

/// IBP time against sweep count and forward time against length, both
/// expected to scale linearly.
pub fn trends(rows: &[BenchRow], cfg: &BenchConfig) -> Vec<TrendCheck> {
    let mut out = Vec::new();
    let mut ks = cfg.ibp_iters.clone();
    ks.sort_unstable();
    let mut ns = cfg.lengths.clone();
    ns.sort_unstable();
    for &n in &cfg.lengths {
        for &t in &cfg.tags {
            for &b in &cfg.batches {
                for pair in ks.windows(2) {
                    let (lo, hi) = (pair[0], pair[1]);
                    if let (Some(a), Some(c)) = (
                        lookup(rows, n, t, b, &Method::Ibp(lo).to_string()),
                        lookup(rows, n, t, b, &Method::Ibp(hi).to_string()),
                    ) {
                        out.push(check(
                            format!("ibp k{hi}/k{lo} n={n} T={t} batch={b}"),
                            c.median_ms / a.median_ms,
                            hi as f64 / lo as f64,
                        ));
                    }
                }
            }
        }
    }
    for &t in &cfg.tags {
        for &b in &cfg.batches {
            for pair in ns.windows(2) {
                let (lo, hi) = (pair[0], pair[1]);
                if let (Some(a), Some(c)) = (lookup(rows, lo, t, b, "forward"), lookup(rows, hi, t, b, "forward")) {
                    out.push(check(
                        format!("forward n={hi}/n={lo} T={t} batch={b}"),
                        c.median_ms / a.median_ms,
                        (hi - 1) as f64 / (lo - 1) as f64,
                    ));
                }
            }
        }
    }
    out
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "threads: {}  reps: {}  warmup: {}", self.threads, self.config.reps, self.config.warmup).unwrap();
        writeln!(s, "{:>5} {:>4} {:>6}  {:<10} {:>12} {:>9}", "n", "T", "batch", "method", "median_ms", "speedup").unwrap();
        for r in &self.rows {
            writeln!(
                s,
                "{:>5} {:>4} {:>6}  {:<10} {:>12.3} {:>8.2}x",
                r.n, r.num_tags, r.batch, r.method, r.median_ms, r.speedup
            )
            .unwrap();
        }
        writeln!(s, "\ntrends (linear within {:.0}%):", TREND_TOLERANCE * 100.0).unwrap();
        for c in &self.trends {
            let tag = if c.passed { "ok" } else { "OFF" };
            writeln!(s, "  {tag:<3} {:<36} ratio {:.3} expected {:.3}", c.name, c.ratio, c.expected).unwrap();
        }
        s
    }
}
