//! Phase-1 simplex for `{x >= 0 : A x = b}` with certificates.
//!
//! Dense tableau over `[A | I]` (one artificial per row, rows sign-flipped so
//! `b >= 0`), Bland's rule, and a final refinement that re-solves the basis
//! from the original data. An infeasible verdict carries the phase-1 dual `y`
//! with `y^T A_j <= 0` for every column and `y^T b > 0`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_LP_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-12;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum LpOutcome {
    Feasible {
        x: Vec<f64>,
        /// `max |A x - b|`.
        residual_inf: f64,
        min_entry: f64,
        objective: f64,
    },
    Infeasible {
        /// One entry per row of `A`, in the caller's sign convention.
        dual: Vec<f64>,
        /// `y^T b - max_j y^T A_j`.
        margin: f64,
        objective: f64,
    },
    Indeterminate {
        objective: f64,
    },
}

impl LpOutcome {
    pub fn objective(&self) -> f64 {
        match self {
            LpOutcome::Feasible { objective, .. }
            | LpOutcome::Infeasible { objective, .. }
            | LpOutcome::Indeterminate { objective } => *objective,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, LpOutcome::Feasible { .. })
    }
}

struct Solved {
    basis: Vec<usize>,
    x_basic: DVector<f64>,
    objective: f64,
    dual: DVector<f64>,
}

/// Phase-1 solve of the sign-normalized system; returns the refined basis.
fn phase1(a: &DMatrix<f64>, b: &DVector<f64>, pivot_tol: f64) -> Result<Solved> {
    let (m, n) = a.shape();
    let cols = n + m;
    let mut t = DMatrix::zeros(m, cols);
    t.columns_mut(0, n).copy_from(a);
    for i in 0..m {
        t[(i, n + i)] = 1.0;
    }
    let mut rhs = b.clone();
    let mut basis: Vec<usize> = (n..cols).collect();
    // Reduced costs: c_j - 1^T T_j with c = (0, 1).
    let mut red = DVector::from_fn(cols, |j, _| if j >= n { 0.0 } else { -a.column(j).sum() });

    let mut pivots = 0;
    loop {
        let Some(enter) = (0..cols).find(|&j| red[j] < -COST_TOL) else { break };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let piv = t[(i, enter)];
            if piv > pivot_tol {
                let ratio = rhs[i] / piv;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((k, r)) if ratio < r - 1e-13 || (ratio <= r + 1e-13 && basis[i] < basis[k]) => Some((i, ratio)),
                    keep => keep,
                };
            }
        }
        let Some((row, _)) = leave else {
            // Reduced cost is negative only through roundoff; stop here.
            break;
        };
        let piv = t[(row, enter)];
        t.row_mut(row).unscale_mut(piv);
        rhs[row] /= piv;
        for i in 0..m {
            if i != row {
                let f = t[(i, enter)];
                if f != 0.0 {
                    for j in 0..cols {
                        let v = t[(row, j)];
                        t[(i, j)] -= f * v;
                    }
                    rhs[i] -= f * rhs[row];
                }
            }
        }
        let f = red[enter];
        let pr = t.row(row).transpose();
        red.axpy(-f, &pr, 1.0);
        basis[row] = enter;
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(Error::Precondition(format!("simplex exceeded {MAX_PIVOTS} pivots")));
        }
    }

    // Refinement from the original data.
    let full_col = |j: usize| -> DVector<f64> {
        if j < n {
            a.column(j).into_owned()
        } else {
            let mut e = DVector::zeros(m);
            e[j - n] = 1.0;
            e
        }
    };
    let mut bm = DMatrix::zeros(m, m);
    for (i, &j) in basis.iter().enumerate() {
        bm.set_column(i, &full_col(j));
    }
    let c_b = DVector::from_fn(m, |i, _| if basis[i] >= n { 1.0 } else { 0.0 });
    let lu = bm.clone().lu();
    let x_basic = lu.solve(b).unwrap_or(rhs);
    let dual = bm.transpose().lu().solve(&c_b).unwrap_or_else(|| {
        // Fall back to reading duals off the artificial reduced costs.
        DVector::from_fn(m, |i, _| 1.0 - red[n + i])
    });
    let objective = basis
        .iter()
        .zip(x_basic.iter())
        .filter(|(&j, _)| j >= n)
        .map(|(_, &v)| v)
        .sum();
    Ok(Solved {
        basis,
        x_basic,
        objective,
        dual,
    })
}

fn solve_once(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64, pivot_tol: f64) -> Result<LpOutcome> {
    let (m, n) = a.shape();
    // Flip rows so that b >= 0.
    let signs: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let af = DMatrix::from_fn(m, n, |i, j| a[(i, j)] * signs[i]);
    let bf = DVector::from_fn(m, |i, _| b[i] * signs[i]);
    let s = phase1(&af, &bf, pivot_tol)?;
    if s.objective <= tol / 10.0 {
        let mut x = vec![0.0; n];
        for (i, &j) in s.basis.iter().enumerate() {
            if j < n {
                x[j] = s.x_basic[i];
            }
        }
        let xv = DVector::from_vec(x.clone());
        let residual_inf = (a * &xv - b).amax();
        let min_entry = x.iter().copied().fold(f64::INFINITY, f64::min);
        return Ok(LpOutcome::Feasible {
            x,
            residual_inf,
            min_entry,
            objective: s.objective,
        });
    }
    if s.objective >= tol * 10.0 {
        let dual = DVector::from_fn(m, |i, _| s.dual[i] * signs[i]);
        let yb = dual.dot(b);
        let max_col = (0..n).map(|j| dual.dot(&a.column(j))).fold(f64::NEG_INFINITY, f64::max);
        return Ok(LpOutcome::Infeasible {
            dual: dual.iter().copied().collect(),
            margin: yb - max_col,
            objective: s.objective,
        });
    }
    Ok(LpOutcome::Indeterminate { objective: s.objective })
}

/// Decide `{x >= 0 : A x = b}` with equality slack `tol`. A phase-1 optimum in
/// `(tol/10, 10 tol)` is retried once at `tol/10` before being reported
/// indeterminate.
pub fn feasibility(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Result<LpOutcome> {
    if a.nrows() != b.len() {
        return Err(Error::Dimension("LP right-hand side length differs from row count".into()));
    }
    match solve_once(a, b, tol, PIVOT_TOL)? {
        LpOutcome::Indeterminate { .. } => solve_once(a, b, tol / 10.0, PIVOT_TOL / 100.0),
        done => Ok(done),
    }
}
