//! Memoryless reference channel analysis: capacity, surjectivity, and the
//! structural checks (scrambling, indecomposability, connectedness) together
//! with the proximity thresholds that guarantee them.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::channel::{check_column_stochastic, proximity, MemorylessChannel, PostChannel, STOCHASTIC_TOL};
use crate::error::{Error, Result};
use crate::info::kl_divergence;
use crate::linalg::sigma_min;
use crate::markov::strongly_connected;

pub const DEFAULT_CAPACITY_TOL: f64 = 1e-10;
pub const DEFAULT_CAPACITY_MAX_ITER: usize = 100_000;
/// Inputs with `P_X(x)` above this belong to the support set `S`.
pub const DEFAULT_SUPPORT_TOL: f64 = 1e-8;

/// Capacity of `W` in nats with the capacity-achieving distributions.
#[derive(Debug, Clone, Serialize)]
pub struct CapacityProfile {
    pub capacity_nats: f64,
    pub p_x: Vec<f64>,
    pub p_y: Vec<f64>,
    /// `D(W(.|x) || P_Y)` for every input.
    pub divergences: Vec<f64>,
    /// `max_x divergences[x] - capacity_nats`, an upper bound on the error.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl CapacityProfile {
    pub fn upper_bound(&self) -> f64 {
        self.capacity_nats + self.gap
    }
}

fn output_distribution(w: &DMatrix<f64>, p: &[f64]) -> Vec<f64> {
    (0..w.nrows())
        .map(|y| (0..w.ncols()).map(|x| w[(y, x)] * p[x]).sum())
        .collect()
}

fn input_divergences(w: &DMatrix<f64>, q: &[f64]) -> Vec<f64> {
    (0..w.ncols())
        .map(|x| kl_divergence(w.column(x).iter(), q.iter()))
        .collect()
}

/// Mutual information `I(X; Y)` of input `p` through `W`.
pub fn mutual_information(w: &MemorylessChannel, p: &[f64]) -> f64 {
    let q = output_distribution(w.matrix(), p);
    input_divergences(w.matrix(), &q)
        .iter()
        .zip(p)
        .map(|(d, &px)| if px > 0.0 { px * d } else { 0.0 })
        .sum()
}

/// Alternating-maximization capacity iteration with the multiplicative update
/// `p(x) <- p(x) exp(D(W(.|x) || q)) / Z`, stopped once the duality gap
/// `max_x D_x - sum_x p(x) D_x` drops to `tol`.
///
/// When `max_iter` is exhausted the last iterate is returned with
/// `converged = false`.
pub fn capacity_iteration(w: &MemorylessChannel, tol: f64, max_iter: usize) -> Result<CapacityProfile> {
    if !(tol > 0.0) {
        return Err(Error::Precondition("tol must be positive".into()));
    }
    let m = w.matrix();
    let nx = w.x_size();
    let mut p = vec![1.0 / nx as f64; nx];
    let mut iterations = 0;
    loop {
        let q = output_distribution(m, &p);
        let d = input_divergences(m, &q);
        let lower: f64 = d.iter().zip(&p).map(|(d, p)| d * p).sum();
        let upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gap = (upper - lower).max(0.0);
        if gap <= tol || iterations >= max_iter {
            return Ok(CapacityProfile {
                capacity_nats: lower,
                p_x: p,
                p_y: q,
                divergences: d,
                gap,
                iterations,
                converged: gap <= tol,
            });
        }
        let mut z = 0.0;
        for (px, dx) in p.iter_mut().zip(&d) {
            *px *= (dx - upper).exp();
            z += *px;
        }
        p.iter_mut().for_each(|v| *v /= z);
        iterations += 1;
    }
}

/// Proximity thresholds below which the structural guarantees hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaThresholds {
    /// `min_x max_y W(y|x)`: indecomposable below this.
    pub indec: f64,
    /// `min_y max_x W(y|x)`: connected below this.
    pub conn: f64,
    /// `sigma_min(W) / |X|`: every kernel full rank below this.
    pub fullrank: f64,
    /// `sigma_min(W(S)) / |S|`: every restricted kernel full rank below this.
    pub fullrank_s: f64,
}

impl DeltaThresholds {
    /// `min(indec, conn)`, the combined structural bound.
    pub fn structural(&self) -> f64 {
        self.indec.min(self.conn)
    }
}

pub fn delta_thresholds(w: &MemorylessChannel, subset: &[usize]) -> Result<DeltaThresholds> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    if let Some(&bad) = subset.iter().find(|&&x| x >= w.x_size()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            size: w.x_size(),
        });
    }
    let m = w.matrix();
    let indec = (0..w.x_size())
        .map(|x| m.column(x).max())
        .fold(f64::INFINITY, f64::min);
    let conn = (0..w.y_size())
        .map(|y| m.row(y).max())
        .fold(f64::INFINITY, f64::min);
    Ok(DeltaThresholds {
        indec,
        conn,
        fullrank: sigma_min(m) / w.x_size() as f64,
        fullrank_s: sigma_min(&w.columns(subset)) / subset.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NotSurjectiveReason {
    /// `|X| < |Y|`.
    InputAlphabetTooSmall,
    /// `W` has rank below `|Y|`, so no `|Y|` columns can be full rank.
    RankDeficient { sigma_min: f64 },
    /// The capacity-achieving input uses the wrong number of symbols.
    SupportSize { found: usize, needed: usize },
    /// The columns of `W` indexed by `S` are singular.
    SupportColumnsSingular { sigma_min: f64 },
}

impl std::fmt::Display for NotSurjectiveReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::InputAlphabetTooSmall => write!(f, "|X| < |Y|"),
            Self::RankDeficient { sigma_min } => {
                write!(f, "rank deficient (sigma_min(W) = {sigma_min:e})")
            }
            Self::SupportSize { found, needed } => {
                write!(f, "capacity-achieving support has {found} symbols, need {needed}")
            }
            Self::SupportColumnsSingular { sigma_min } => {
                write!(f, "support columns singular (sigma_min = {sigma_min:e})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SurjectivityVerdict {
    Surjective,
    NotSurjective { reason: NotSurjectiveReason },
    /// Some margin lies within `(-tol, tol)`.
    Indeterminate { detail: String },
}

impl std::fmt::Display for SurjectivityVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Surjective => write!(f, "surjective"),
            Self::NotSurjective { reason } => write!(f, "not surjective: {reason}"),
            Self::Indeterminate { detail } => write!(f, "indeterminate: {detail}"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SurjectivityReport {
    pub verdict: SurjectivityVerdict,
    pub is_surjective: bool,
    pub support_s: Vec<usize>,
    /// `min_{x not in S} C(W) - D(W(.|x) || P_Y)`; `None` when `S = X`.
    pub slack_margin: Option<f64>,
    pub sigma_min_s: f64,
    pub thresholds: DeltaThresholds,
}

/// Strict complementary slackness plus full rank of the support columns.
pub fn surjectivity_check(
    w: &MemorylessChannel,
    profile: &CapacityProfile,
    tol: f64,
) -> Result<SurjectivityReport> {
    if profile.p_x.len() != w.x_size() {
        return Err(Error::Dimension("profile does not match W".into()));
    }
    let (nx, ny) = (w.x_size(), w.y_size());
    let c = profile.capacity_nats;
    let support_s: Vec<usize> = (0..nx).filter(|&x| profile.p_x[x] > tol).collect();
    let slack_margin = (0..nx)
        .filter(|x| !support_s.contains(x))
        .map(|x| c - profile.divergences[x])
        .reduce(f64::min);
    let sigma_min_s = if support_s.is_empty() {
        0.0
    } else {
        sigma_min(&w.columns(&support_s))
    };
    let thresholds = delta_thresholds(w, &support_s)?;

    let verdict = (|| {
        if nx < ny {
            return SurjectivityVerdict::NotSurjective {
                reason: NotSurjectiveReason::InputAlphabetTooSmall,
            };
        }
        let s_full = sigma_min(w.matrix());
        if s_full <= tol {
            return SurjectivityVerdict::NotSurjective {
                reason: NotSurjectiveReason::RankDeficient { sigma_min: s_full },
            };
        }
        for &x in &support_s {
            let dev = (profile.divergences[x] - c).abs();
            if dev > tol {
                return SurjectivityVerdict::Indeterminate {
                    detail: format!("KKT equality off by {dev:e} at x={x}; profile not converged"),
                };
            }
        }
        if let Some(m) = slack_margin {
            if m.abs() < tol {
                return SurjectivityVerdict::Indeterminate {
                    detail: format!("slack margin {m:e} within tolerance {tol:e}"),
                };
            }
        }
        if support_s.len() != ny {
            return SurjectivityVerdict::NotSurjective {
                reason: NotSurjectiveReason::SupportSize {
                    found: support_s.len(),
                    needed: ny,
                },
            };
        }
        if sigma_min_s <= tol {
            return SurjectivityVerdict::NotSurjective {
                reason: NotSurjectiveReason::SupportColumnsSingular {
                    sigma_min: sigma_min_s,
                },
            };
        }
        SurjectivityVerdict::Surjective
    })();

    Ok(SurjectivityReport {
        is_surjective: verdict == SurjectivityVerdict::Surjective,
        verdict,
        support_s,
        slack_margin,
        sigma_min_s,
        thresholds,
    })
}

/// `lambda(M) = 1 - min_{i,j} sum_k min(M(k,i), M(k,j))` of a square
/// column-stochastic matrix; `lambda < 1` means scrambling.
pub fn scrambling_coefficient(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Dimension("scrambling coefficient needs a square matrix".into()));
    }
    check_column_stochastic(m, "matrix", STOCHASTIC_TOL)?;
    let n = m.ncols();
    let mut min_overlap = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let overlap: f64 = (0..n).map(|k| m[(k, i)].min(m[(k, j)])).sum();
            min_overlap = min_overlap.min(overlap);
        }
    }
    if n < 2 {
        min_overlap = 1.0;
    }
    Ok((1.0 - min_overlap).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct IndecomposabilityReport {
    pub holds: bool,
    pub delta: f64,
    /// `min_x max_y W(y|x)`.
    pub bound: f64,
    pub via_bound: bool,
    /// `lambda(Q^(s)_x)` for every input.
    pub scrambling: Vec<f64>,
    pub via_scrambling: bool,
}

/// Two sufficient conditions for indecomposability: proximity below the
/// column-max bound, or every state matrix scrambling.
pub fn check_indecomposable_sufficient(
    ch: &PostChannel,
    w: &MemorylessChannel,
) -> Result<IndecomposabilityReport> {
    let delta = proximity(ch, w)?.delta;
    let bound = delta_thresholds(w, &[0])?.indec;
    let scrambling = (0..ch.x_size())
        .map(|x| scrambling_coefficient(&ch.state_matrix(x)?))
        .collect::<Result<Vec<_>>>()?;
    let via_bound = delta < bound;
    let via_scrambling = scrambling.iter().all(|&l| l < 1.0);
    Ok(IndecomposabilityReport {
        holds: via_bound || via_scrambling,
        delta,
        bound,
        via_bound,
        scrambling,
        via_scrambling,
    })
}

/// Exact connectedness: every state reaches every state through some input
/// sequence with positive probability.
pub fn check_connected(ch: &PostChannel) -> bool {
    let n = ch.y_size();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|from| {
            (0..n)
                .filter(|&to| (0..ch.x_size()).any(|x| ch.prob(to, x, from) > 0.0))
                .collect()
        })
        .collect();
    strongly_connected(&adj)
}

/// Side-channel report of the proximity bound for connectedness.
pub fn connectivity_bound_holds(ch: &PostChannel, w: &MemorylessChannel) -> Result<(bool, f64, f64)> {
    let delta = proximity(ch, w)?.delta;
    let bound = delta_thresholds(w, &[0])?.conn;
    Ok((delta < bound, delta, bound))
}

/// Channel output distribution `W p` as a vector.
pub fn output_vector(w: &MemorylessChannel, p: &[f64]) -> DVector<f64> {
    DVector::from_vec(output_distribution(w.matrix(), p))
}
