//! Log-domain arithmetic with `-inf` as the encoding of a forbidden transition.
//!
//! Every place that has to combine a possibly forbidden score with something
//! else goes through these helpers, so that `exp(-inf) = 0`, `0 * -inf = 0`
//! and `0 log 0 = 0` hold uniformly.

pub const NEG_INF: f64 = f64::NEG_INFINITY;

/// `log(exp(a) + exp(b))`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == NEG_INF {
        return b;
    }
    if b == NEG_INF {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Max-shifted logsumexp. Returns `-inf` for empty or all `-inf` input.
#[inline]
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(NEG_INF, f64::max);
    if max == NEG_INF {
        return NEG_INF;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Single-pass logsumexp with a running maximum.
#[inline]
pub fn logsumexp_iter<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut max = NEG_INF;
    let mut sum = 0.0;
    for v in values {
        if v == NEG_INF {
            continue;
        }
        if v <= max {
            sum += (v - max).exp();
        } else {
            sum = sum * (max - v).exp() + 1.0;
            max = v;
        }
    }
    if max == NEG_INF {
        NEG_INF
    } else {
        max + sum.ln()
    }
}

/// `x * y` where a zero factor annihilates `-inf`.
#[inline]
pub fn mul_weight(x: f64, weight: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * weight
    }
}

/// `<q, w>` with `0 * -inf = 0`.
pub fn dot(q: &[f64], w: &[f64]) -> f64 {
    q.iter().zip(w).map(|(&a, &b)| mul_weight(a, b)).sum()
}

/// `x log x` with `0 log 0 = 0`.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Shannon entropy of a nonnegative vector (not necessarily normalized).
pub fn entropy(q: &[f64]) -> f64 {
    -q.iter().map(|&x| xlogx(x)).sum::<f64>()
}

/// Whether a weight is admissible: finite or exactly `-inf`.
#[inline]
pub fn is_admissible(w: f64) -> bool {
    w.is_finite() || w == NEG_INF
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_exp_handles_neg_inf() {
        assert_eq!(log_add_exp(NEG_INF, NEG_INF), NEG_INF);
        assert_eq!(log_add_exp(NEG_INF, 2.0), 2.0);
        assert!((log_add_exp(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn logsumexp_is_stable() {
        let v = logsumexp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(logsumexp(&[]), NEG_INF);
        assert_eq!(logsumexp(&[NEG_INF, NEG_INF]), NEG_INF);
    }

    #[test]
    fn streaming_matches_two_pass() {
        let v = [0.3, -2.0, NEG_INF, 7.5, 7.4, -30.0];
        assert!((logsumexp(&v) - logsumexp_iter(v)).abs() < 1e-13);
    }

    #[test]
    fn zero_annihilates_neg_inf() {
        assert_eq!(mul_weight(0.0, NEG_INF), 0.0);
        assert_eq!(dot(&[0.0, 1.0], &[NEG_INF, 2.0]), 2.0);
        assert_eq!(dot(&[0.5], &[NEG_INF]), NEG_INF);
        assert_eq!(xlogx(0.0), 0.0);
    }
}
