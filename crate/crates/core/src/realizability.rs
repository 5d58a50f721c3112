//! Can the optimal-feedback output law be produced without feedback?
//!
//! For each initial state the question is whether `q^(n)_{y0}` lies in the
//! convex hull of the columns of `Q^(n)_{y0}` (an LP), with the least-squares
//! distance to their span as a cheaper diagnostic:
//!
//! ```text
//! D = sum_{y0} || Q^(n)_{y0} pinv(Q^(n)_{y0}) q^(n)_{y0} - q^(n)_{y0} ||_1
//! ```

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{build_example, PostChannel};
use crate::error::{Error, Result};
use crate::feedback::{solve_fcap_with, FcapOptions, FeedbackResult, DEFAULT_FCAP_MAX_ITER};
use crate::linalg::{numerical_rank, pseudo_inverse, RANK_RTOL};
use crate::lp::{feasibility, LpOutcome, DEFAULT_LP_TOL};
use crate::simulation::{build_plan, forward, markov_output_vector, nfold_matrix, MarkovOutputLaw};

/// Tolerance of the `P_{X_t Y_{t-1}} = P*_{XY'}` check.
pub const MARGINAL_TOL: f64 = 1e-8;
pub const DEFAULT_SWEEP_N: usize = 2;
pub const CSV_HEADER: &str = "eps,c_f_nats,D,feasible_all,rank,min_plan_entry";
/// Solver gap used before realizability tests; D inherits the solver error.
pub const REALIZABILITY_FCAP_TOL: f64 = 1e-11;

/// Optimal feedback solution and its Markov output law, solved tightly with
/// Newton refinement so that span and hull tests see the law, not solver noise.
pub fn optimal_law(ch: &PostChannel) -> Result<(FeedbackResult, MarkovOutputLaw)> {
    let opts = FcapOptions {
        tol: REALIZABILITY_FCAP_TOL,
        max_iter: DEFAULT_FCAP_MAX_ITER,
        newton_refine: true,
    };
    let fb = solve_fcap_with(ch, &opts, None)?;
    let law = MarkovOutputLaw::from_feedback(&fb)?;
    Ok((fb, law))
}

#[derive(Debug, Clone, Serialize)]
pub struct LstsqProjection {
    pub coefficients: Vec<f64>,
    pub residual_l1: f64,
    pub rank: usize,
}

pub fn lstsq_projection(ch: &PostChannel, law: &MarkovOutputLaw, y0: usize, n: usize) -> Result<LstsqProjection> {
    let q_mat = nfold_matrix(ch, y0, n)?;
    let target = markov_output_vector(law, y0, n)?;
    let coef = pseudo_inverse(&q_mat, RANK_RTOL) * &target;
    let fitted = &q_mat * &coef;
    Ok(LstsqProjection {
        residual_l1: (fitted - target).iter().map(|v| v.abs()).sum(),
        rank: numerical_rank(&q_mat, RANK_RTOL),
        coefficients: coef.iter().copied().collect(),
    })
}

pub fn d_metric(ch: &PostChannel, law: &MarkovOutputLaw, n: usize) -> Result<f64> {
    (0..ch.y_size())
        .map(|y0| lstsq_projection(ch, law, y0, n).map(|r| r.residual_l1))
        .sum()
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum LpVerdict {
    Feasible {
        /// Input law over `X^n` (base-`|X|` index, first symbol most significant).
        witness: Vec<f64>,
        residual_inf: f64,
        min_entry: f64,
    },
    Infeasible {
        /// `c` with `c^T q^(n) > max_j c^T Q^(n)_j + margin`.
        separator: Vec<f64>,
        margin: f64,
    },
    Indeterminate {
        phase1_objective: f64,
    },
}

impl LpVerdict {
    pub fn feasibility(&self) -> Feasibility {
        match self {
            LpVerdict::Feasible { .. } => Feasibility::Yes,
            LpVerdict::Infeasible { .. } => Feasibility::No,
            LpVerdict::Indeterminate { .. } => Feasibility::Indeterminate,
        }
    }

    pub fn witness(&self) -> Option<&[f64]> {
        match self {
            LpVerdict::Feasible { witness, .. } => Some(witness),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Feasibility {
    Yes,
    No,
    Indeterminate,
}

impl Feasibility {
    fn all(items: impl IntoIterator<Item = Feasibility>) -> Feasibility {
        let mut out = Feasibility::Yes;
        for f in items {
            match f {
                Feasibility::No => return Feasibility::No,
                Feasibility::Indeterminate => out = Feasibility::Indeterminate,
                Feasibility::Yes => {}
            }
        }
        out
    }
}

/// Separator `c` over output sequences and its margin against every column.
fn separator_margin(q_mat: &DMatrix<f64>, target: &DVector<f64>, c: &DVector<f64>) -> f64 {
    let best = (0..q_mat.ncols()).map(|j| c.dot(&q_mat.column(j))).fold(f64::NEG_INFINITY, f64::max);
    c.dot(target) - best
}

/// Phase-1 LP for `{p >= 0, 1^T p = 1, Q^(n)_{y0} p = q^(n)_{y0}}`.
pub fn lp_feasibility(ch: &PostChannel, law: &MarkovOutputLaw, y0: usize, n: usize, tol: f64) -> Result<LpVerdict> {
    let q_mat = nfold_matrix(ch, y0, n)?;
    let target = markov_output_vector(law, y0, n)?;
    let (rows, cols) = q_mat.shape();
    let mut a = DMatrix::zeros(rows + 1, cols);
    a.rows_mut(0, rows).copy_from(&q_mat);
    a.row_mut(rows).fill(1.0);
    let mut b = DVector::zeros(rows + 1);
    b.rows_mut(0, rows).copy_from(&target);
    b[rows] = 1.0;
    Ok(match feasibility(&a, &b, tol)? {
        LpOutcome::Feasible {
            x,
            residual_inf,
            min_entry,
            ..
        } => LpVerdict::Feasible {
            witness: x,
            residual_inf,
            min_entry,
        },
        LpOutcome::Infeasible { dual, .. } => {
            let c = DVector::from_iterator(rows, dual.into_iter().take(rows));
            let margin = separator_margin(&q_mat, &target, &c);
            if margin > tol {
                LpVerdict::Infeasible {
                    separator: c.iter().copied().collect(),
                    margin,
                }
            } else {
                // A separator that does not certify is not a verdict.
                LpVerdict::Indeterminate {
                    phase1_objective: margin,
                }
            }
        }
        LpOutcome::Indeterminate { objective } => LpVerdict::Indeterminate {
            phase1_objective: objective,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalCondition {
    /// Every kernel has full column rank, so the output condition implies it.
    Implied,
    Holds,
    Fails,
    /// Some state's output law is not realizable; not evaluated.
    NotApplicable,
}

impl fmt::Display for MarginalCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarginalCondition::Implied => "implied by full column rank",
            MarginalCondition::Holds => "holds",
            MarginalCondition::Fails => "fails",
            MarginalCondition::NotApplicable => "not applicable",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StateVerdict {
    pub y0: usize,
    pub feasible: Feasibility,
    pub ls_residual_l1: f64,
    pub rank: usize,
    pub lp: LpVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct RealizabilityVerdict {
    pub n: usize,
    pub per_y0: Vec<StateVerdict>,
    #[serde(rename = "D")]
    pub d: f64,
    pub marginal_condition: MarginalCondition,
    /// Output law and input-state marginals both realizable at this `n`.
    pub realizable: Feasibility,
}

/// `max_t max |P_{X_t Y_{t-1}} - P*_{XY'}|` for the joint `pi(y0) p_{y0}(x^n)`.
fn marginal_gap(ch: &PostChannel, initial: &DVector<f64>, plans: &[Vec<f64>], target: &DMatrix<f64>, n: usize) -> f64 {
    let mut sums = vec![DMatrix::zeros(ch.x_size(), ch.y_size()); n];
    for (y0, p) in plans.iter().enumerate() {
        let pass = forward(ch, y0, p, n);
        for (acc, m) in sums.iter_mut().zip(pass.input_state) {
            *acc += m * initial[y0];
        }
    }
    sums.iter().map(|m| (m - target).amax()).fold(0.0, f64::max)
}

/// Joint LP over all initial states with the input-state marginals imposed.
fn combined_marginal_lp(ch: &PostChannel, law: &MarkovOutputLaw, target: &DMatrix<f64>, n: usize, tol: f64) -> Result<bool> {
    let (nx, ny) = (ch.x_size(), ch.y_size());
    let len = nx.pow(n as u32);
    let ylen = ny.pow(n as u32);
    let out_rows = ny * ylen;
    let marg_rows = n * nx * ny;
    let mut a = DMatrix::zeros(out_rows + marg_rows, ny * len);
    let mut b = DVector::zeros(out_rows + marg_rows);
    for y0 in 0..ny {
        let q_mat = nfold_matrix(ch, y0, n)?;
        let q = markov_output_vector(law, y0, n)?;
        a.view_mut((y0 * ylen, y0 * len), (ylen, len)).copy_from(&q_mat);
        b.rows_mut(y0 * ylen, ylen).copy_from(&(q * law.initial()[y0]));
        for xi in 0..len {
            // Law of Y_{t-1} given x^{t-1} and y0, walked forward.
            let digits: Vec<usize> = (0..n).map(|t| (xi / nx.pow((n - 1 - t) as u32)) % nx).collect();
            let mut dist = DVector::zeros(ny);
            dist[y0] = 1.0;
            for (t, &x) in digits.iter().enumerate() {
                for s in 0..ny {
                    a[(out_rows + (t * nx + x) * ny + s, y0 * len + xi)] = dist[s];
                }
                let mut next = DVector::zeros(ny);
                for s in 0..ny {
                    next += ch.kernel(s).column(x) * dist[s];
                }
                dist = next;
            }
        }
    }
    for t in 0..n {
        for x in 0..nx {
            for s in 0..ny {
                b[out_rows + (t * nx + x) * ny + s] = target[(x, s)];
            }
        }
    }
    Ok(feasibility(&a, &b, tol)?.is_feasible())
}

pub fn theorem2_check(ch: &PostChannel, law: &MarkovOutputLaw, fb: &FeedbackResult, n: usize) -> Result<RealizabilityVerdict> {
    theorem2_check_with_tol(ch, law, fb, n, DEFAULT_LP_TOL)
}

pub fn theorem2_check_with_tol(
    ch: &PostChannel,
    law: &MarkovOutputLaw,
    fb: &FeedbackResult,
    n: usize,
    tol: f64,
) -> Result<RealizabilityVerdict> {
    if !fb.converged {
        return Err(Error::Precondition("feedback solution did not converge".into()));
    }
    let per_y0 = (0..ch.y_size())
        .into_par_iter()
        .map(|y0| {
            let ls = lstsq_projection(ch, law, y0, n)?;
            let lp = lp_feasibility(ch, law, y0, n, tol)?;
            Ok(StateVerdict {
                y0,
                feasible: lp.feasibility(),
                ls_residual_l1: ls.residual_l1,
                rank: ls.rank,
                lp,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let d = per_y0.iter().map(|v| v.ls_residual_l1).sum();
    let output_ok = Feasibility::all(per_y0.iter().map(|v| v.feasible));
    let full_rank = ch.kernels().iter().all(|k| numerical_rank(k, RANK_RTOL) == ch.x_size());
    let marginal_condition = if output_ok != Feasibility::Yes {
        MarginalCondition::NotApplicable
    } else if full_rank {
        MarginalCondition::Implied
    } else {
        let target = fb.maximizer.matrix();
        let plans: Vec<Vec<f64>> = per_y0.iter().map(|v| v.lp.witness().unwrap_or(&[]).to_vec()).collect();
        if marginal_gap(ch, law.initial(), &plans, target, n) <= MARGINAL_TOL
            || combined_marginal_lp(ch, law, target, n, tol)?
        {
            MarginalCondition::Holds
        } else {
            MarginalCondition::Fails
        }
    };
    let realizable = match marginal_condition {
        MarginalCondition::Implied | MarginalCondition::Holds => Feasibility::Yes,
        MarginalCondition::Fails => Feasibility::No,
        MarginalCondition::NotApplicable => output_ok,
    };
    Ok(RealizabilityVerdict {
        n,
        per_y0,
        d,
        marginal_condition,
        realizable,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibleAll {
    True,
    False,
    Indeterminate,
    Error,
}

impl fmt::Display for FeasibleAll {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeasibleAll::True => "true",
            FeasibleAll::False => "false",
            FeasibleAll::Indeterminate => "indeterminate",
            FeasibleAll::Error => "error",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub c_f_nats: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub feasible_all: FeasibleAll,
    /// Smallest numerical rank of `Q^(n)_{y0}` over initial states.
    pub rank: Option<usize>,
    /// Smallest entry of the simulation plan when one can be built.
    pub min_plan_entry: Option<f64>,
    pub error: Option<String>,
}

fn sweep_point(example_id: u32, eps: f64, n: usize) -> Result<SweepRow> {
    let (ch, _) = build_example(example_id, eps)?;
    let (fb, law) = optimal_law(&ch)?;
    let mut d = 0.0;
    let mut rank = usize::MAX;
    let mut verdicts = Vec::new();
    for y0 in 0..ch.y_size() {
        let ls = lstsq_projection(&ch, &law, y0, n)?;
        d += ls.residual_l1;
        rank = rank.min(ls.rank);
        verdicts.push(lp_feasibility(&ch, &law, y0, n, DEFAULT_LP_TOL)?.feasibility());
    }
    let feasible_all = match Feasibility::all(verdicts) {
        Feasibility::Yes => FeasibleAll::True,
        Feasibility::No => FeasibleAll::False,
        Feasibility::Indeterminate => FeasibleAll::Indeterminate,
    };
    let min_plan_entry = build_plan(&ch, &law, n).ok().map(|p| p.min_entry);
    Ok(SweepRow {
        eps,
        c_f_nats: fb.c_f_nats,
        d,
        feasible_all,
        rank: Some(rank),
        min_plan_entry,
        error: None,
    })
}

/// One row per grid point, in grid order; failures are recorded in-row.
pub fn sweep_example(example_id: u32, eps_grid: &[f64], n: usize) -> Vec<SweepRow> {
    eps_grid
        .par_iter()
        .map(|&eps| {
            sweep_point(example_id, eps, n).unwrap_or_else(|e| SweepRow {
                eps,
                c_f_nats: f64::NAN,
                d: f64::NAN,
                feasible_all: FeasibleAll::Error,
                rank: None,
                min_plan_entry: None,
                error: Some(e.to_string()),
            })
        })
        .collect()
}

fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_float(r.eps),
            fmt_float(r.c_f_nats),
            fmt_float(r.d),
            r.feasible_all,
            r.rank.map_or_else(|| "NaN".to_string(), |k| k.to_string()),
            fmt_float(r.min_plan_entry.unwrap_or(f64::NAN)),
        )?;
    }
    Ok(())
}

/// Parse `a:b:step` into `a, a + step, ...` up to and including `b`.
pub fn parse_eps_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = |why: &str| Error::Parse(format!("eps grid {spec:?}: {why}"));
    if parts.len() != 3 {
        return Err(bad("expected a:b:step"));
    }
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad("not a number")))
        .collect::<Result<Vec<_>>>()?;
    let (a, b, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(bad("step must be positive and bounds finite"));
    }
    if b < a {
        return Err(bad("upper bound below lower bound"));
    }
    let count = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| a + i as f64 * step).collect())
}
