//! POST channels and memoryless reference channels.
//!
//! A POST channel is stored as one column-stochastic `|Y| x |X|` matrix per
//! state `y'` (the previous output), entry `(y, x) = Q(y | x, y')`. The
//! input-indexed view `Q^(s)_x` with entry `(y, y') = Q(y | x, y')` is
//! assembled on demand by [`PostChannel::state_matrix`].

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Column sums must be within this distance of one.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Check entries in `[0, 1]` and column sums within `tol` of one.
pub fn check_column_stochastic(m: &DMatrix<f64>, what: &str, tol: f64) -> Result<()> {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let v = m[(r, c)];
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::EntryOutOfRange {
                    what: what.to_string(),
                    row: r,
                    col: c,
                    value: v,
                });
            }
        }
        let sum: f64 = m.column(c).sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::NotStochastic {
                what: what.to_string(),
                x: c,
                sum,
                tol,
            });
        }
    }
    Ok(())
}

/// Memoryless channel `W` stored as a `|Y| x |X|` matrix with entry
/// `(y, x) = W(y | x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MemorylessChannel {
    w: DMatrix<f64>,
}

impl MemorylessChannel {
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        if w.nrows() < 2 || w.ncols() < 2 {
            return Err(Error::Dimension(format!(
                "alphabets need at least 2 symbols, got |Y|={} |X|={}",
                w.nrows(),
                w.ncols()
            )));
        }
        check_column_stochastic(&w, "W", STOCHASTIC_TOL)?;
        Ok(Self { w })
    }

    /// Build from the row-major `|Y| x |X|` entries.
    pub fn from_rows(y_size: usize, x_size: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != y_size * x_size {
            return Err(Error::Dimension(format!(
                "expected {} entries, got {}",
                y_size * x_size,
                rows.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(y_size, x_size, rows))
    }

    /// Binary symmetric channel with the given crossover probability.
    pub fn binary_symmetric(crossover: f64) -> Result<Self> {
        let p = crossover;
        Self::from_rows(2, 2, &[1.0 - p, p, p, 1.0 - p])
    }

    pub fn identity(size: usize) -> Result<Self> {
        Self::new(DMatrix::identity(size, size))
    }

    pub fn x_size(&self) -> usize {
        self.w.ncols()
    }

    pub fn y_size(&self) -> usize {
        self.w.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// `W(y | x)`.
    pub fn prob(&self, y: usize, x: usize) -> f64 {
        self.w[(y, x)]
    }

    /// Submatrix of the columns listed in `subset`.
    pub fn columns(&self, subset: &[usize]) -> DMatrix<f64> {
        self.w.select_columns(subset)
    }
}

/// POST channel `Q(y | x, y')`.
#[derive(Debug, Clone, PartialEq)]
pub struct PostChannel {
    x_size: usize,
    y_size: usize,
    kernels: Vec<DMatrix<f64>>,
}

impl PostChannel {
    /// `kernels[y']` is `Q^(c)_{y'}`, a `|Y| x |X|` column-stochastic matrix.
    pub fn new(kernels: Vec<DMatrix<f64>>) -> Result<Self> {
        let y_size = kernels.len();
        if y_size < 2 {
            return Err(Error::Dimension(format!(
                "need at least 2 states, got {y_size}"
            )));
        }
        let x_size = kernels[0].ncols();
        if x_size < 2 {
            return Err(Error::Dimension(format!(
                "need at least 2 inputs, got {x_size}"
            )));
        }
        for (s, k) in kernels.iter().enumerate() {
            if k.nrows() != y_size || k.ncols() != x_size {
                return Err(Error::Dimension(format!(
                    "kernel for state y'={s} is {}x{}, expected {y_size}x{x_size}",
                    k.nrows(),
                    k.ncols()
                )));
            }
            check_column_stochastic(k, &format!("kernel for state y'={s}"), STOCHASTIC_TOL)?;
        }
        Ok(Self {
            x_size,
            y_size,
            kernels,
        })
    }

    /// The memoryless channel viewed as a POST channel: every kernel equals `W`.
    pub fn degenerate(w: &MemorylessChannel) -> Self {
        Self {
            x_size: w.x_size(),
            y_size: w.y_size(),
            kernels: vec![w.matrix().clone(); w.y_size()],
        }
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn kernels(&self) -> &[DMatrix<f64>] {
        &self.kernels
    }

    /// `Q^(c)_{y'}`.
    pub fn kernel(&self, state: usize) -> &DMatrix<f64> {
        &self.kernels[state]
    }

    /// `Q(y | x, y')`.
    #[inline]
    pub fn prob(&self, y: usize, x: usize, state: usize) -> f64 {
        self.kernels[state][(y, x)]
    }

    /// `Q^(s)_x`, the `|Y| x |Y|` state transition matrix under input `x`.
    pub fn state_matrix(&self, x: usize) -> Result<DMatrix<f64>> {
        if x >= self.x_size {
            return Err(Error::IndexOutOfRange {
                index: x,
                size: self.x_size,
            });
        }
        Ok(DMatrix::from_fn(self.y_size, self.y_size, |y, s| {
            self.prob(y, x, s)
        }))
    }

    /// True when no kernel depends on the state.
    pub fn is_memoryless(&self) -> bool {
        self.kernels.iter().all(|k| k == &self.kernels[0])
    }

    /// Channel restricted to the inputs listed in `subset`, in that order.
    pub fn select_inputs(&self, subset: &[usize]) -> Result<Self> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        if let Some(&bad) = subset.iter().find(|&&x| x >= self.x_size) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                size: self.x_size,
            });
        }
        let kernels = self.kernels.iter().map(|k| k.select_columns(subset)).collect();
        Self::new(kernels)
    }

    /// Apply a permutation to input symbols: new input `i` is old input `perm[i]`.
    pub fn permute_inputs(&self, perm: &[usize]) -> Result<Self> {
        self.select_inputs(perm)
    }

    /// Simultaneously relabel outputs and states: new symbol `i` is old `perm[i]`.
    pub fn permute_outputs(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.y_size {
            return Err(Error::Dimension("permutation length".into()));
        }
        let kernels = perm
            .iter()
            .map(|&old_state| {
                let k = &self.kernels[old_state];
                DMatrix::from_fn(self.y_size, self.x_size, |y, x| k[(perm[y], x)])
            })
            .collect();
        Self::new(kernels)
    }
}

/// Distance of a POST channel from a memoryless reference.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ProximityReport {
    /// `max_{y'} ||Q^(c)_{y'} - W||_inf` with the entrywise max-abs norm.
    pub delta: f64,
    pub per_state: Vec<f64>,
}

pub fn proximity(ch: &PostChannel, w: &MemorylessChannel) -> Result<ProximityReport> {
    if ch.x_size() != w.x_size() || ch.y_size() != w.y_size() {
        return Err(Error::Dimension(format!(
            "channel is {}x{}, reference is {}x{}",
            ch.y_size(),
            ch.x_size(),
            w.y_size(),
            w.x_size()
        )));
    }
    let per_state: Vec<f64> = ch
        .kernels()
        .iter()
        .map(|k| (k - w.matrix()).amax())
        .collect();
    let delta = per_state.iter().copied().fold(0.0, f64::max);
    Ok(ProximityReport { delta, per_state })
}

/// Base matrix `W` and per-state perturbation directions `U_{y'}` of the two
/// worked examples; the example channel is `Q^(c)_{y'} = W + eps * U_{y'}`.
fn example_components(example_id: u32) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    // Per-state coefficients: u_{y',0} = a (w1 - w0), u_{y',1} = -b (w1 - w0).
    let a = [1.0 / 2.0, 2.0 / 5.0, 2.0 / 3.0];
    let b = [1.0 / 3.0, 1.0 / 2.0, 3.0 / 5.0];
    let (w0, w1) = match example_id {
        1 => (
            [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
            [1.0 / 5.0, 3.0 / 5.0, 1.0 / 5.0],
        ),
        2 => ([1.0 / 2.0, 1.0 / 3.0, 1.0 / 6.0], [1.0 / 4.0, 1.0 / 2.0, 1.0 / 4.0]),
        other => return Err(Error::UnknownExample(other)),
    };
    let x_size = if example_id == 1 { 2 } else { 3 };
    let w = DMatrix::from_fn(3, x_size, |y, x| match x {
        0 => w0[y],
        1 => w1[y],
        _ => 2.0 / 3.0 * w0[y] + 1.0 / 3.0 * w1[y],
    });
    let dirs = (0..3)
        .map(|s| {
            DMatrix::from_fn(3, x_size, |y, x| {
                let d = w1[y] - w0[y];
                let u0 = a[s] * d;
                let u1 = -b[s] * d;
                match x {
                    0 => u0,
                    1 => u1,
                    _ => 2.0 / 3.0 * u0 + 1.0 / 3.0 * u1,
                }
            })
        })
        .collect();
    Ok((w, dirs))
}

/// Largest `eps` keeping every entry of `W + eps * U_{y'}` nonnegative.
pub fn example_max_eps(example_id: u32) -> Result<f64> {
    let (w, dirs) = example_components(example_id)?;
    let mut max_eps = f64::INFINITY;
    for u in &dirs {
        for (wv, uv) in w.iter().zip(u.iter()) {
            if *uv < 0.0 {
                max_eps = max_eps.min(wv / -uv);
            }
        }
    }
    Ok(max_eps)
}

/// Build worked example 1 (`|X| = 2, |Y| = 3`) or 2 (`|X| = |Y| = 3`, rank-deficient
/// `W`) at perturbation size `eps`, together with its reference channel.
pub fn build_example(example_id: u32, eps: f64) -> Result<(PostChannel, MemorylessChannel)> {
    let (w, dirs) = example_components(example_id)?;
    let max_eps = example_max_eps(example_id)?;
    if !(eps >= 0.0) || eps > max_eps {
        return Err(Error::EpsilonTooLarge { eps, max_eps });
    }
    let kernels: Vec<DMatrix<f64>> = dirs.iter().map(|u| &w + u * eps).collect();
    let reference = MemorylessChannel::new(w)?;
    Ok((PostChannel::new(kernels)?, reference))
}
