//! Non-feedback input plans `p^(n)_{y0}` over `X^n` whose output law is the
//! Markov law of an optimal feedback scheme, built by the entrywise recursion
//!
//! ```text
//! p^(n)_{y0}(x1, x_2^n) = sum_{y1} G_{y0}(x1, y1) q*_{y0}(y1) p^(n-1)_{y1}(x_2^n),   G_{y'} = (Q^(c)_{y'})^-1
//! ```
//!
//! Sequences are indexed in base `|X|` (or `|Y|`) with the first symbol most
//! significant: `x^n -> x1 |X|^(n-1) + ... + xn`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::channel::{MemorylessChannel, PostChannel};
use crate::error::{Error, Result};
use crate::feedback::FeedbackResult;
use crate::info::neg_xlogx;
use crate::linalg::checked_inverse;
use crate::markov::stationary_distribution;
use crate::memoryless::CapacityProfile;

/// Default cap on the number of entries of any exponential-size object.
pub const SIZE_CAP: usize = 10_000_000;
/// Entries in `(-AMBIGUITY_BAND, 0]` are reported as numerically ambiguous.
pub const AMBIGUITY_BAND: f64 = 1e-13;

pub const INDEX_CONVENTION: &str = "vectors[y0][i] is the probability of x^n = (x1, ..., xn) where \
i = x1*|X|^(n-1) + x2*|X|^(n-2) + ... + xn (base |X|, first symbol most significant)";

/// First-order Markov output law with kernel columns `q*_{y'}` and initial law.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovOutputLaw {
    kernel: DMatrix<f64>,
    initial: DVector<f64>,
}

impl MarkovOutputLaw {
    pub fn new(kernel: DMatrix<f64>, initial: DVector<f64>) -> Result<Self> {
        if !kernel.is_square() || initial.len() != kernel.nrows() {
            return Err(Error::Dimension("output law kernel must be |Y|x|Y| with a length-|Y| initial law".into()));
        }
        crate::channel::check_column_stochastic(&kernel, "output law kernel", 1e-9)?;
        if (&kernel * &initial - &initial).amax() > 1e-9 {
            return Err(Error::Precondition("initial law is not stationary for the kernel".into()));
        }
        Ok(Self { kernel, initial })
    }

    /// Kernel with its (first closed class) stationary law as initial law.
    pub fn stationary(kernel: DMatrix<f64>) -> Result<Self> {
        let st = stationary_distribution(&kernel)?;
        Self::new(kernel, st.distribution)
    }

    pub fn from_feedback(result: &FeedbackResult) -> Result<Self> {
        Self::new(result.output_kernel.clone(), result.stationary.clone())
    }

    /// i.i.d. law with marginal `q`.
    pub fn iid(q: &DVector<f64>) -> Result<Self> {
        let n = q.len();
        Self::new(DMatrix::from_fn(n, n, |y, _| q[y]), q.clone())
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.initial
    }

    pub fn size(&self) -> usize {
        self.initial.len()
    }
}

fn checked_pow(base: usize, n: usize, factor: usize, cap: usize) -> Result<usize> {
    let entries = (base as u128).pow(n as u32) * factor as u128;
    if entries > cap as u128 {
        return Err(Error::SizeCap { entries, cap });
    }
    Ok(entries as usize / factor.max(1))
}

/// `Q^(n)_{y0}` with entry `(y^n, x^n) = prod_t Q(y_t | x_t, y_{t-1})`.
pub fn nfold_matrix(ch: &PostChannel, y0: usize, n: usize) -> Result<DMatrix<f64>> {
    nfold_matrix_capped(ch, y0, n, SIZE_CAP)
}

pub fn nfold_matrix_capped(ch: &PostChannel, y0: usize, n: usize, cap: usize) -> Result<DMatrix<f64>> {
    let (nx, ny) = (ch.x_size(), ch.y_size());
    if y0 >= ny {
        return Err(Error::IndexOutOfRange { index: y0, size: ny });
    }
    if n == 0 {
        return Err(Error::Precondition("horizon must be at least 1".into()));
    }
    let entries = (ny as u128).pow(n as u32) * (nx as u128).pow(n as u32);
    if entries > cap as u128 {
        return Err(Error::SizeCap { entries, cap });
    }
    // level[s] = Q^(k)_s, grown from k = 1.
    let mut level: Vec<DMatrix<f64>> = ch.kernels().to_vec();
    for _ in 1..n {
        let (r, c) = (level[0].nrows(), level[0].ncols());
        level = (0..ny)
            .map(|s| {
                let k = ch.kernel(s);
                let mut m = DMatrix::zeros(ny * r, nx * c);
                for y1 in 0..ny {
                    for x1 in 0..nx {
                        m.view_mut((y1 * r, x1 * c), (r, c)).copy_from(&(&level[y1] * k[(y1, x1)]));
                    }
                }
                m
            })
            .collect();
    }
    Ok(level.swap_remove(y0))
}

/// `q^(n)_{y0}` with entry `y^n -> prod_t P(y_t | y_{t-1})`.
pub fn markov_output_vector(law: &MarkovOutputLaw, y0: usize, n: usize) -> Result<DVector<f64>> {
    let ny = law.size();
    if y0 >= ny {
        return Err(Error::IndexOutOfRange { index: y0, size: ny });
    }
    if n == 0 {
        return Err(Error::Precondition("horizon must be at least 1".into()));
    }
    checked_pow(ny, n, 1, SIZE_CAP)?;
    let k = law.kernel();
    let mut level: Vec<DVector<f64>> = (0..ny).map(|s| k.column(s).into_owned()).collect();
    for _ in 1..n {
        let len = level[0].len();
        level = (0..ny)
            .map(|s| {
                let mut v = DVector::zeros(ny * len);
                for y1 in 0..ny {
                    v.rows_mut(y1 * len, len).copy_from(&(&level[y1] * k[(y1, s)]));
                }
                v
            })
            .collect();
    }
    Ok(level.swap_remove(y0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PlanValidity {
    Valid,
    /// Smallest entry lies in `(-1e-13, 0]`.
    Ambiguous { y0: usize, index: usize, value: f64 },
    Invalid { y0: usize, index: usize, value: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct SimPlan {
    pub n: usize,
    pub x_size: usize,
    pub y_size: usize,
    pub index_convention: &'static str,
    /// Channel input symbol behind each plan symbol (identity unless the
    /// support was restricted).
    pub input_symbols: Vec<usize>,
    pub vectors: Vec<Vec<f64>>,
    pub min_entry: f64,
    /// `max_{y0} |1^T p - 1|`.
    pub norm_error: f64,
    pub validity: PlanValidity,
}

impl SimPlan {
    fn from_vectors(n: usize, x_size: usize, y_size: usize, vectors: Vec<Vec<f64>>) -> Self {
        let mut arg = (0, 0, f64::INFINITY);
        let mut norm_error: f64 = 0.0;
        for (y0, v) in vectors.iter().enumerate() {
            norm_error = norm_error.max((v.iter().sum::<f64>() - 1.0).abs());
            for (i, &e) in v.iter().enumerate() {
                if e < arg.2 {
                    arg = (y0, i, e);
                }
            }
        }
        let (y0, index, value) = arg;
        let validity = if value > 0.0 {
            PlanValidity::Valid
        } else if value > -AMBIGUITY_BAND {
            PlanValidity::Ambiguous { y0, index, value }
        } else {
            PlanValidity::Invalid { y0, index, value }
        };
        Self {
            n,
            x_size,
            y_size,
            index_convention: INDEX_CONVENTION,
            input_symbols: (0..x_size).collect(),
            vectors,
            min_entry: value,
            norm_error,
            validity,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.validity == PlanValidity::Valid
    }

    /// Error naming the offending entry unless the plan is valid.
    pub fn require_valid(&self) -> Result<()> {
        match self.validity {
            PlanValidity::Valid => Ok(()),
            PlanValidity::Ambiguous { y0, index, value } | PlanValidity::Invalid { y0, index, value } => {
                Err(Error::InvalidPlan { y0, index, value })
            }
        }
    }

    /// Law of the first input symbol under `p^(n)_{y0}`.
    pub fn first_symbol_marginal(&self, y0: usize) -> Vec<f64> {
        let block = self.vectors[y0].len() / self.x_size;
        (0..self.x_size)
            .map(|x| self.vectors[y0][x * block..(x + 1) * block].iter().sum())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

fn check_plan_inputs(ch: &PostChannel, law: &MarkovOutputLaw) -> Result<Vec<DMatrix<f64>>> {
    if ch.x_size() != ch.y_size() {
        return Err(Error::Precondition(format!(
            "plans need |X| = |Y| (got {} inputs, {} outputs); restrict the input support to |Y| symbols first",
            ch.x_size(),
            ch.y_size()
        )));
    }
    if law.size() != ch.y_size() {
        return Err(Error::Dimension("output law size differs from |Y|".into()));
    }
    (0..ch.y_size())
        .map(|s| checked_inverse(ch.kernel(s), &format!("kernel for state y'={s}")))
        .collect()
}

/// Plans for horizons `1..=n_max`, sharing the recursion.
pub fn build_plans_up_to(ch: &PostChannel, law: &MarkovOutputLaw, n_max: usize) -> Result<Vec<SimPlan>> {
    build_plans_capped(ch, law, n_max, SIZE_CAP)
}

pub fn build_plans_capped(ch: &PostChannel, law: &MarkovOutputLaw, n_max: usize, cap: usize) -> Result<Vec<SimPlan>> {
    if n_max == 0 {
        return Err(Error::Precondition("horizon must be at least 1".into()));
    }
    let inverses = check_plan_inputs(ch, law)?;
    let (nx, ny) = (ch.x_size(), ch.y_size());
    checked_pow(nx, n_max, ny, cap)?;
    let q = law.kernel();
    // coef[s][(x1, y1)] = G_s(x1, y1) q*_s(y1)
    let coef: Vec<DMatrix<f64>> = (0..ny)
        .map(|s| DMatrix::from_fn(nx, ny, |x1, y1| inverses[s][(x1, y1)] * q[(y1, s)]))
        .collect();
    // Base case G_s q*_s: row sums of coef.
    let mut level: Vec<Vec<f64>> = (0..ny).map(|s| (0..nx).map(|x| coef[s].row(x).sum()).collect()).collect();
    let mut plans = vec![SimPlan::from_vectors(1, nx, ny, level.clone())];
    for n in 2..=n_max {
        let len = level[0].len();
        let next: Vec<Vec<f64>> = (0..ny)
            .map(|s| {
                let mut v = vec![0.0; nx * len];
                for x1 in 0..nx {
                    let block = &mut v[x1 * len..(x1 + 1) * len];
                    for y1 in 0..ny {
                        let c = coef[s][(x1, y1)];
                        for (b, &p) in block.iter_mut().zip(&level[y1]) {
                            *b += c * p;
                        }
                    }
                }
                v
            })
            .collect();
        plans.push(SimPlan::from_vectors(n, nx, ny, next.clone()));
        level = next;
    }
    Ok(plans)
}

pub fn build_plan(ch: &PostChannel, law: &MarkovOutputLaw, n: usize) -> Result<SimPlan> {
    Ok(build_plans_up_to(ch, law, n)?.pop().expect("n >= 1"))
}

/// Forward pass over `t = 1..n` for one initial state.
pub(crate) struct ForwardPass {
    /// Law of `Y^n` given `Y0 = y0`.
    pub output: Vec<f64>,
    /// `H(Y^n | X^n, Y0 = y0)`.
    pub cond_entropy: f64,
    /// `P(X_t = x, Y_{t-1} = y' | Y0 = y0)` for `t = 1..n`, each `|X| x |Y|`.
    pub input_state: Vec<DMatrix<f64>>,
}

pub(crate) fn forward(ch: &PostChannel, y0: usize, p: &[f64], n: usize) -> ForwardPass {
    let (nx, ny) = (ch.x_size(), ch.y_size());
    let col_entropy = |x: usize, s: usize| -> f64 { ch.kernel(s).column(x).iter().map(|&v| neg_xlogx(v)).sum() };
    // cur[yprefix * |X|^(n-t) + xrest] = P(y^t, x_{t+1}^n)
    let mut cur = p.to_vec();
    let mut prefixes = 1usize;
    let mut cond_entropy = 0.0;
    let mut input_state = Vec::with_capacity(n);
    for t in 0..n {
        let rest = nx.pow((n - t - 1) as u32);
        let mut next = vec![0.0; prefixes * ny * rest];
        let mut joint = DMatrix::zeros(nx, ny);
        for pre in 0..prefixes {
            let prev = if t == 0 { y0 } else { pre % ny };
            let q = ch.kernel(prev);
            for x in 0..nx {
                let base = pre * nx * rest + x * rest;
                let mass: f64 = cur[base..base + rest].iter().sum();
                joint[(x, prev)] += mass;
                cond_entropy += mass * col_entropy(x, prev);
                for y in 0..ny {
                    let w = q[(y, x)];
                    if w == 0.0 {
                        continue;
                    }
                    let out = (pre * ny + y) * rest;
                    for r in 0..rest {
                        next[out + r] += w * cur[base + r];
                    }
                }
            }
        }
        input_state.push(joint);
        cur = next;
        prefixes *= ny;
    }
    ForwardPass {
        output: cur,
        cond_entropy,
        input_state,
    }
}

/// Per-state residuals `||Q^(n)_{y0} p - q^(n)_{y0}||_1`.
#[derive(Debug, Clone, Serialize)]
pub struct PlanResidual {
    pub per_state: Vec<f64>,
    pub max: f64,
}

pub fn verify_plan(ch: &PostChannel, plan: &SimPlan, law: &MarkovOutputLaw) -> Result<PlanResidual> {
    check_plan_dims(ch, plan)?;
    checked_pow(ch.y_size().max(ch.x_size()), plan.n, 1, SIZE_CAP)?;
    let per_state = (0..ch.y_size())
        .map(|y0| {
            let out = forward(ch, y0, &plan.vectors[y0], plan.n).output;
            let target = markov_output_vector(law, y0, plan.n)?;
            Ok(out.iter().zip(target.iter()).map(|(a, b)| (a - b).abs()).sum())
        })
        .collect::<Result<Vec<f64>>>()?;
    let max = per_state.iter().copied().fold(0.0, f64::max);
    Ok(PlanResidual { per_state, max })
}

fn check_plan_dims(ch: &PostChannel, plan: &SimPlan) -> Result<()> {
    if plan.x_size != ch.x_size() || plan.y_size != ch.y_size() || plan.vectors.len() != ch.y_size() {
        return Err(Error::Dimension("plan alphabets differ from the channel".into()));
    }
    let len = ch.x_size().pow(plan.n as u32);
    if plan.vectors.iter().any(|v| v.len() != len) {
        return Err(Error::Dimension(format!("plan vectors must have length |X|^n = {len}")));
    }
    Ok(())
}

/// `(1/n) I(X^n; Y^n | Y0)` with `Y0` drawn from the law's initial distribution.
pub fn plan_mutual_information(ch: &PostChannel, plan: &SimPlan, law: &MarkovOutputLaw) -> Result<f64> {
    check_plan_dims(ch, plan)?;
    plan.require_valid()?;
    checked_pow(ch.y_size().max(ch.x_size()), plan.n, 1, SIZE_CAP)?;
    let mut total = 0.0;
    for y0 in 0..ch.y_size() {
        let w = law.initial()[y0];
        if w == 0.0 {
            continue;
        }
        let pass = forward(ch, y0, &plan.vectors[y0], plan.n);
        let (out, cond) = (pass.output, pass.cond_entropy);
        let h_out: f64 = out.iter().map(|&v| neg_xlogx(v)).sum();
        total += w * (h_out - cond);
    }
    Ok(total / plan.n as f64)
}

/// `min_x p^W(x) / sum_y |W^-1(x, y)| q^W(y)` for the capacity-achieving pair.
pub fn kappa_bound(profile: &CapacityProfile, w: &MemorylessChannel) -> Result<f64> {
    if w.x_size() != w.y_size() {
        return Err(Error::Precondition("kappa bound needs a square W".into()));
    }
    let inv = checked_inverse(w.matrix(), "W")?;
    let mut best = f64::INFINITY;
    for x in 0..w.x_size() {
        let denom: f64 = (0..w.y_size()).map(|y| inv[(x, y)].abs() * profile.p_y[y]).sum();
        best = best.min(profile.p_x[x] / denom);
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize)]
pub struct KappaReport {
    pub kappa_max: f64,
    /// `max |p_{y0'}(x^n) - p_{y0}(x^n)| / p_{y0}(x^n)` over the checked plans.
    pub observed_max_deviation: f64,
    pub horizon_checked: usize,
    pub within_kappa: bool,
}

pub fn deviation_check(plans: &[SimPlan], kappa: f64) -> Result<KappaReport> {
    let mut dev: f64 = 0.0;
    let mut horizon = 0;
    for plan in plans {
        plan.require_valid()?;
        horizon = horizon.max(plan.n);
        for a in &plan.vectors {
            for b in &plan.vectors {
                for (pa, pb) in a.iter().zip(b) {
                    dev = dev.max((pb - pa).abs() / pa);
                }
            }
        }
    }
    Ok(KappaReport {
        kappa_max: kappa,
        observed_max_deviation: dev,
        horizon_checked: horizon,
        within_kappa: dev <= kappa,
    })
}
