//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Refusal threshold for inverting channel kernels.
pub const SINGULAR_CUTOFF: f64 = 1e-12;

/// Relative singular-value cutoff used for pseudoinverses and numerical rank.
pub const RANK_RTOL: f64 = 1e-10;

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Smallest of the `min(rows, cols)` singular values.
pub fn sigma_min(m: &DMatrix<f64>) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// Number of singular values above `rtol * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    let s = singular_values(m);
    let Some(&smax) = s.first() else { return 0 };
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rtol * smax).count()
}

/// Moore-Penrose pseudoinverse with a relative singular-value cutoff.
pub fn pseudo_inverse(m: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let mut out = DMatrix::zeros(c, r);
    if smax == 0.0 {
        return out;
    }
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > rtol * smax {
            let vk = v_t.row(k).transpose();
            let uk = u.column(k);
            out += (vk * uk.transpose()) / s;
        }
    }
    out
}

/// Inverse by partial-pivot LU, refusing matrices with sigma_min below
/// [`SINGULAR_CUTOFF`].
pub fn checked_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "{what} is {}x{}, not square",
            m.nrows(),
            m.ncols()
        )));
    }
    let smin = sigma_min(m);
    if smin <= SINGULAR_CUTOFF {
        return Err(Error::Singular {
            what: what.to_string(),
            sigma_min: smin,
        });
    }
    m.clone().lu().try_inverse().ok_or_else(|| Error::Singular {
        what: what.to_string(),
        sigma_min: smin,
    })
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn l1(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}
