//! Entropy and divergence primitives in nats, with `0 log 0 = 0`.

/// `p ln(p / q)`, zero when `p == 0`; `+inf` when `p > 0 == q`.
#[inline]
pub fn rel_term(p: f64, q: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else if q <= 0.0 {
        f64::INFINITY
    } else {
        p * (p / q).ln()
    }
}

/// `-p ln p` with `0 ln 0 = 0`.
#[inline]
pub fn neg_xlogx(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.ln()
    }
}

/// Kullback-Leibler divergence `D(p || q)`.
pub fn kl_divergence<'a>(
    p: impl IntoIterator<Item = &'a f64>,
    q: impl IntoIterator<Item = &'a f64>,
) -> f64 {
    p.into_iter().zip(q).map(|(&a, &b)| rel_term(a, b)).sum()
}

pub fn entropy<'a>(p: impl IntoIterator<Item = &'a f64>) -> f64 {
    p.into_iter().map(|&v| neg_xlogx(v)).sum()
}

/// Natural-log binary entropy.
pub fn binary_entropy(p: f64) -> f64 {
    neg_xlogx(p) + neg_xlogx(1.0 - p)
}

/// Total-variation distance `1/2 sum |p - q|`.
pub fn total_variation<'a>(
    p: impl IntoIterator<Item = &'a f64>,
    q: impl IntoIterator<Item = &'a f64>,
) -> f64 {
    0.5 * p.into_iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
