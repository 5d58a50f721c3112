//! Feedback capacity of a POST channel as the convex program
//!
//! ```text
//! maximize   I(X; Y | Y')   over P_{XY'}
//! subject to P_Y = P_{Y'},  P_{XYY'}(x, y, y') = P_{XY'}(x, y') Q(y | x, y')
//! ```
//!
//! solved by projected gradient ascent (Barzilai-Borwein steps with Armijo
//! backtracking) over the intersection of the simplex with the stationarity
//! subspace. Projections use Dykstra's alternating scheme followed by an exact
//! solve on the detected active face.
//!
//! Decision variables are stored flat with index `y' * |X| + x`, so the
//! Hessian is block diagonal with one `|X| x |X|` block per state.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::PostChannel;
use crate::error::{Error, Result};
use crate::info::{neg_xlogx, total_variation};
use crate::linalg::{checked_inverse, pseudo_inverse, sigma_min, SINGULAR_CUTOFF};
use crate::markov::stationary_distribution;

pub const DEFAULT_FCAP_TOL: f64 = 1e-9;
pub const DEFAULT_FCAP_MAX_ITER: usize = 200_000;
/// Tolerance of the polytope projection.
pub const PROJECTION_TOL: f64 = 1e-12;
/// Dykstra iteration cap per projection.
pub const PROJECTION_MAX_ITER: usize = 10_000;
/// Floor applied to iterates before logarithms in the gradient.
pub const INTERIOR_FLOOR: f64 = 1e-14;
/// Stationarity residual accepted as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-10;

const ARMIJO_SIGMA: f64 = 1e-4;
const STEP_MIN: f64 = 1e-12;
const STEP_MAX: f64 = 1e8;

/// A distribution `P_{XY'}` on inputs x states, with its stationarity residual.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointInputState {
    /// `|X| x |Y|`, entry `(x, y') = P_{XY'}(x, y')`.
    #[serde(serialize_with = "ser_matrix")]
    p: DMatrix<f64>,
    /// `P_Y(y) - P_{Y'}(y)`.
    #[serde(serialize_with = "ser_vector")]
    stationarity_residual: DVector<f64>,
}

pub(crate) fn ser_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for r in 0..m.nrows() {
        let row: Vec<f64> = m.row(r).iter().copied().collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

pub(crate) fn ser_vector<S: serde::Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

impl JointInputState {
    /// Wrap a distribution; stationarity is not required.
    pub fn new(ch: &PostChannel, p: DMatrix<f64>) -> Result<Self> {
        if p.nrows() != ch.x_size() || p.ncols() != ch.y_size() {
            return Err(Error::Dimension(format!(
                "joint input-state matrix must be {}x{}, got {}x{}",
                ch.x_size(),
                ch.y_size(),
                p.nrows(),
                p.ncols()
            )));
        }
        if p.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::Precondition("negative or NaN probability".into()));
        }
        let total = p.sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Precondition(format!("probabilities sum to {total}")));
        }
        let stationarity_residual = stationarity_residual(ch, &p);
        Ok(Self {
            p,
            stationarity_residual,
        })
    }

    /// `P_{XY'}(x, y') = P_{X|Y'}(x | y') P_{Y'}(y')`.
    pub fn from_conditional(ch: &PostChannel, conditional: &DMatrix<f64>, state: &DVector<f64>) -> Result<Self> {
        let p = DMatrix::from_fn(ch.x_size(), ch.y_size(), |x, s| conditional[(x, s)] * state[s]);
        Self::new(ch, p)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn stationarity_residual(&self) -> &DVector<f64> {
        &self.stationarity_residual
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.stationarity_residual.amax() <= tol
    }

    /// `P_{Y'}`.
    pub fn state_marginal(&self) -> DVector<f64> {
        DVector::from_fn(self.p.ncols(), |s, _| self.p.column(s).sum())
    }

    /// `P_Y`.
    pub fn output_marginal(&self, ch: &PostChannel) -> DVector<f64> {
        joint_output(ch, &self.p).column_sum()
    }

    /// `P_{X|Y'}`; columns with zero state mass are set uniform.
    pub fn input_kernel(&self) -> DMatrix<f64> {
        let nx = self.p.nrows();
        let mut k = self.p.clone();
        for s in 0..k.ncols() {
            let m = k.column(s).sum();
            if m > 0.0 {
                k.column_mut(s).unscale_mut(m);
            } else {
                k.column_mut(s).fill(1.0 / nx as f64);
            }
        }
        k
    }

    /// `P_{Y|Y'}`, column `y'` is `Q^(c)_{y'} P_{X|Y'}(. | y')`.
    pub fn output_kernel(&self, ch: &PostChannel) -> DMatrix<f64> {
        let pk = self.input_kernel();
        let ny = ch.y_size();
        let mut out = DMatrix::zeros(ny, ny);
        for s in 0..ny {
            out.set_column(s, &(ch.kernel(s) * pk.column(s)));
        }
        out
    }

    fn flat(&self) -> Vec<f64> {
        // Column-major storage is exactly the `y' * |X| + x` layout.
        self.p.as_slice().to_vec()
    }
}

/// `P_{YY'}`, `|Y| x |Y|` with entry `(y, y')`.
fn joint_output(ch: &PostChannel, p: &DMatrix<f64>) -> DMatrix<f64> {
    let ny = ch.y_size();
    let mut out = DMatrix::zeros(ny, ny);
    for s in 0..ny {
        out.set_column(s, &(ch.kernel(s) * p.column(s)));
    }
    out
}

fn stationarity_residual(ch: &PostChannel, p: &DMatrix<f64>) -> DVector<f64> {
    let pyy = joint_output(ch, p);
    let py = pyy.column_sum();
    DVector::from_fn(ch.y_size(), |y, _| py[y] - p.column(y).sum())
}

/// Flat evaluation kernel shared by the objective, gradient and solver.
struct Objective<'a> {
    ch: &'a PostChannel,
    nx: usize,
    ny: usize,
    /// `H(Q(. | x, y'))` at flat index `y' * |X| + x`.
    column_entropy: Vec<f64>,
}

impl<'a> Objective<'a> {
    fn new(ch: &'a PostChannel) -> Self {
        let (nx, ny) = (ch.x_size(), ch.y_size());
        let column_entropy = (0..ny)
            .flat_map(|s| (0..nx).map(move |x| (s, x)))
            .map(|(s, x)| ch.kernel(s).column(x).iter().map(|&q| neg_xlogx(q)).sum())
            .collect();
        Self {
            ch,
            nx,
            ny,
            column_entropy,
        }
    }

    /// `P_{YY'}(y, s)` and `P_{Y'}(s)`.
    fn marginals(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (nx, ny) = (self.nx, self.ny);
        let mut pyy = vec![0.0; ny * ny];
        let mut ps = vec![0.0; ny];
        for s in 0..ny {
            let k = self.ch.kernel(s);
            for x in 0..nx {
                let w = v[s * nx + x];
                ps[s] += w;
                if w != 0.0 {
                    for y in 0..ny {
                        pyy[s * ny + y] += w * k[(y, x)];
                    }
                }
            }
        }
        (pyy, ps)
    }

    /// `I(X; Y | Y') = H(Y | Y') - H(Y | X, Y')`.
    fn value(&self, v: &[f64]) -> f64 {
        let ny = self.ny;
        let (pyy, ps) = self.marginals(v);
        let mut h = 0.0;
        for s in 0..ny {
            if ps[s] <= 0.0 {
                continue;
            }
            for y in 0..ny {
                let j = pyy[s * ny + y];
                if j > 0.0 {
                    h -= j * (j / ps[s]).ln();
                }
            }
        }
        let linear: f64 = v.iter().zip(&self.column_entropy).map(|(a, b)| a * b).sum();
        h - linear
    }

    /// Gradient `D(Q(.|x,y') || P_{Y|Y'}(.|y'))`, evaluated on the floored
    /// iterate; the flag reports that a required marginal was zero.
    fn gradient(&self, v: &[f64]) -> (Vec<f64>, bool) {
        let (nx, ny) = (self.nx, self.ny);
        let (pyy_raw, ps_raw) = self.marginals(v);
        let mut boundary = ps_raw.iter().any(|&m| m <= 0.0);
        for s in 0..ny {
            let k = self.ch.kernel(s);
            for y in 0..ny {
                if pyy_raw[s * ny + y] <= 0.0 && (0..nx).any(|x| k[(y, x)] > 0.0) {
                    boundary = true;
                }
            }
        }
        let floored: Vec<f64> = v.iter().map(|&a| a.max(INTERIOR_FLOOR)).collect();
        let (pyy, ps) = self.marginals(&floored);
        let mut g = vec![0.0; nx * ny];
        for s in 0..ny {
            let k = self.ch.kernel(s);
            for x in 0..nx {
                let mut d = 0.0;
                for y in 0..ny {
                    let q = k[(y, x)];
                    if q > 0.0 {
                        d += q * (q * ps[s] / pyy[s * ny + y]).ln();
                    }
                }
                g[s * nx + x] = d;
            }
        }
        (g, boundary)
    }
}

pub fn objective(ch: &PostChannel, p: &JointInputState) -> f64 {
    Objective::new(ch).value(&p.flat())
}

/// Partial derivatives of `I(X; Y | Y')` with respect to `P_{XY'}`.
#[derive(Debug, Clone)]
pub struct Gradient {
    /// `|X| x |Y|`.
    pub values: DMatrix<f64>,
    /// A state or output marginal required by the formula is zero; the values
    /// are then one-sided limits evaluated at the floored point.
    pub boundary: bool,
}

pub fn gradient(ch: &PostChannel, p: &JointInputState) -> Gradient {
    let (g, boundary) = Objective::new(ch).gradient(&p.flat());
    Gradient {
        values: DMatrix::from_vec(ch.x_size(), ch.y_size(), g),
        boundary,
    }
}

/// Hessian blocks `H_{y'} = (1/P_{Y'}(y')) (1 1^T - Q^T D_{y'} Q)` with
/// `Q = Q^(c)_{y'}` and `D_{y'} = diag(1 / P_{Y|Y'}(. | y'))`.
pub fn hessian_blocks(ch: &PostChannel, p: &JointInputState) -> Result<Vec<DMatrix<f64>>> {
    let nx = ch.x_size();
    let ps = p.state_marginal();
    let out_kernel = p.output_kernel(ch);
    (0..ch.y_size())
        .map(|s| {
            if ps[s] <= 0.0 {
                return Err(Error::Boundary(format!("P_Y'({s}) = 0")));
            }
            let q = ch.kernel(s);
            let mut d = DMatrix::zeros(ch.y_size(), ch.y_size());
            for y in 0..ch.y_size() {
                let c = out_kernel[(y, s)];
                if c <= 0.0 {
                    return Err(Error::Boundary(format!("P_Y|Y'({y} | {s}) = 0")));
                }
                d[(y, y)] = 1.0 / c;
            }
            let ones = DMatrix::from_element(nx, nx, 1.0);
            Ok((ones - q.transpose() * d * q) / ps[s])
        })
        .collect()
}

/// The feasible set `{v >= 0, sum v = 1, P_Y = P_{Y'}}` in flat coordinates.
pub struct FeasibleSet {
    n: usize,
    b_mat: DMatrix<f64>,
    b_rhs: DVector<f64>,
    b_pinv: DMatrix<f64>,
}

impl FeasibleSet {
    pub fn new(ch: &PostChannel) -> Self {
        let (nx, ny) = (ch.x_size(), ch.y_size());
        let n = nx * ny;
        // One stationarity row is redundant; drop y = |Y| - 1.
        let rows = ny;
        let mut b_mat = DMatrix::zeros(rows, n);
        for y in 0..ny - 1 {
            for s in 0..ny {
                for x in 0..nx {
                    let own = if y == s { 1.0 } else { 0.0 };
                    b_mat[(y, s * nx + x)] = ch.prob(y, x, s) - own;
                }
            }
        }
        b_mat.row_mut(ny - 1).fill(1.0);
        let mut b_rhs = DVector::zeros(rows);
        b_rhs[ny - 1] = 1.0;
        let b_pinv = pseudo_inverse(&b_mat, 1e-12);
        Self {
            n,
            b_mat,
            b_rhs,
            b_pinv,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn project_affine(&self, z: &DVector<f64>) -> DVector<f64> {
        let r = &self.b_mat * z - &self.b_rhs;
        z - &self.b_pinv * r
    }

    /// Orthogonal projection of a direction onto the tangent space
    /// `{d : sum d = 0, stationarity map(d) = 0}`.
    pub fn project_tangent(&self, d: &DVector<f64>) -> DVector<f64> {
        d - &self.b_pinv * (&self.b_mat * d)
    }

    /// Affine constraint residual `max |B v - b|`.
    pub fn residual(&self, v: &DVector<f64>) -> f64 {
        (&self.b_mat * v - &self.b_rhs).amax()
    }

    /// Exact projection onto the affine set intersected with `v_i = 0, i in zeros`.
    fn project_face(&self, z: &DVector<f64>, zeros: &[usize]) -> DVector<f64> {
        let m = self.b_mat.nrows();
        let mut a = DMatrix::zeros(m + zeros.len(), self.n);
        a.rows_mut(0, m).copy_from(&self.b_mat);
        let mut rhs = DVector::zeros(m + zeros.len());
        rhs.rows_mut(0, m).copy_from(&self.b_rhs);
        for (r, &i) in zeros.iter().enumerate() {
            a[(m + r, i)] = 1.0;
        }
        let pinv = pseudo_inverse(&a, 1e-12);
        z - pinv * (&a * z - rhs)
    }

    /// Euclidean projection onto the feasible polytope.
    pub fn project(&self, z: &DVector<f64>) -> DVector<f64> {
        let a = self.project_affine(z);
        if a.min() >= 0.0 {
            return a;
        }
        // Dykstra between the affine set and the nonnegative orthant.
        let mut x = z.clone();
        let mut p = DVector::zeros(self.n);
        let mut q = DVector::zeros(self.n);
        for _ in 0..PROJECTION_MAX_ITER {
            let y = self.project_affine(&(&x + &p));
            p = &x + &p - &y;
            let x_new = (&y + &q).map(|v| v.max(0.0));
            q = &y + &q - &x_new;
            let moved = (&x_new - &x).amax();
            let gap = (&y - &x_new).amax();
            x = x_new;
            if moved <= PROJECTION_TOL && gap <= PROJECTION_TOL {
                break;
            }
        }
        // Polish on the detected face so the result is exactly feasible.
        let zeros: Vec<usize> = (0..self.n).filter(|&i| x[i] <= PROJECTION_TOL).collect();
        let face = self.project_face(z, &zeros);
        if face.min() >= -PROJECTION_TOL {
            let mut out = face.map(|v| v.max(0.0));
            for &i in &zeros {
                out[i] = 0.0;
            }
            return out;
        }
        x
    }
}

/// A feasible starting point with its irreducibility flag.
#[derive(Debug, Clone)]
pub struct FeasibleInit {
    pub point: JointInputState,
    /// False when the induced chain has more than one closed class.
    pub irreducible: bool,
}

fn feasible_from_conditional(ch: &PostChannel, cond: &DMatrix<f64>) -> Result<FeasibleInit> {
    let ny = ch.y_size();
    let mut induced = DMatrix::zeros(ny, ny);
    for s in 0..ny {
        induced.set_column(s, &(ch.kernel(s) * cond.column(s)));
    }
    let st = stationary_distribution(&induced)?;
    let point = JointInputState::from_conditional(ch, cond, &st.distribution)?;
    Ok(FeasibleInit {
        point,
        irreducible: st.unique,
    })
}

/// Uniform `P_{X|Y'}` with the stationary state distribution it induces.
pub fn feasible_init(ch: &PostChannel) -> Result<FeasibleInit> {
    let cond = DMatrix::from_element(ch.x_size(), ch.y_size(), 1.0 / ch.x_size() as f64);
    feasible_from_conditional(ch, &cond)
}

/// Random `P_{X|Y'}` (normalized exponential weights) with its stationary state law.
pub fn random_feasible<R: Rng + ?Sized>(ch: &PostChannel, rng: &mut R) -> Result<JointInputState> {
    let mut cond = DMatrix::from_fn(ch.x_size(), ch.y_size(), |_, _| {
        -(1.0 - rng.random::<f64>()).ln()
    });
    for s in 0..ch.y_size() {
        let m = cond.column(s).sum();
        cond.column_mut(s).unscale_mut(m);
    }
    Ok(feasible_from_conditional(ch, &cond)?.point)
}

/// Solver settings.
#[derive(Debug, Clone)]
pub struct FcapOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Finish with projected Newton steps on the active face.
    pub newton_refine: bool,
}

impl Default for FcapOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_FCAP_TOL,
            max_iter: DEFAULT_FCAP_MAX_ITER,
            newton_refine: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FeedbackResult {
    pub c_f_nats: f64,
    pub maximizer: JointInputState,
    /// `P*_{Y|Y'}`, column `y'` is `q*_{y'}`.
    #[serde(serialize_with = "ser_matrix")]
    pub output_kernel: DMatrix<f64>,
    /// `P*_{X|Y'}`, column `y'` is `p*_{y'}`.
    #[serde(serialize_with = "ser_matrix")]
    pub input_kernel: DMatrix<f64>,
    /// `P*_{Y'}`.
    #[serde(serialize_with = "ser_vector")]
    pub stationary: DVector<f64>,
    pub iterations: usize,
    /// `max |v - proj(v + grad)|` at the returned point.
    pub certificate_gap: f64,
    pub converged: bool,
    /// Some state has zero mass at the maximizer.
    pub boundary: bool,
}

pub fn solve_fcap(ch: &PostChannel, tol: f64, max_iter: usize) -> Result<FeedbackResult> {
    solve_fcap_with(
        ch,
        &FcapOptions {
            tol,
            max_iter,
            ..Default::default()
        },
        None,
    )
}

fn dot(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(b)
}

/// Solve from `start`, or from [`feasible_init`] when `None`.
pub fn solve_fcap_with(
    ch: &PostChannel,
    opts: &FcapOptions,
    start: Option<&JointInputState>,
) -> Result<FeedbackResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::Precondition("tol must be positive".into()));
    }
    let obj = Objective::new(ch);
    let set = FeasibleSet::new(ch);
    let init = match start {
        Some(p) => p.clone(),
        None => feasible_init(ch)?.point,
    };
    let mut x = set.project(&DVector::from_vec(init.flat()));
    let mut f = obj.value(x.as_slice());
    let mut g = DVector::from_vec(obj.gradient(x.as_slice()).0);
    let mut step = 1.0;
    let mut iterations = 0;
    let mut cert = certificate(&set, &x, &g);
    let f_noise = |f: f64| 1e-15 * f.abs().max(1.0);

    while cert > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let mut s = step;
        let (x_new, f_new) = loop {
            let cand = set.project(&(&x + &g * s));
            let fc = obj.value(cand.as_slice());
            let ascent = dot(&g, &(&cand - &x));
            if fc >= f + ARMIJO_SIGMA * ascent - f_noise(f) || s <= STEP_MIN {
                break (cand, fc);
            }
            s *= 0.5;
        };
        let g_new = DVector::from_vec(obj.gradient(x_new.as_slice()).0);
        let dx = &x_new - &x;
        let dg = &g_new - &g;
        let curv = dot(&dx, &dg);
        step = if curv < 0.0 {
            (-dot(&dx, &dx) / curv).clamp(STEP_MIN, STEP_MAX)
        } else {
            (s * 2.0).min(STEP_MAX)
        };
        let stalled = dx.amax() == 0.0;
        x = x_new;
        f = f_new;
        g = g_new;
        cert = certificate(&set, &x, &g);
        if stalled && s <= STEP_MIN {
            break;
        }
    }

    if opts.newton_refine {
        newton_refine(ch, &obj, &set, &mut x, 20);
        g = DVector::from_vec(obj.gradient(x.as_slice()).0);
        cert = certificate(&set, &x, &g);
    }

    let p = DMatrix::from_vec(ch.x_size(), ch.y_size(), x.as_slice().to_vec());
    let maximizer = JointInputState::new(ch, p)?;
    let stationary = maximizer.state_marginal();
    let boundary = stationary.iter().any(|&m| m <= 0.0);
    Ok(FeedbackResult {
        c_f_nats: objective(ch, &maximizer),
        output_kernel: maximizer.output_kernel(ch),
        input_kernel: maximizer.input_kernel(),
        stationary,
        maximizer,
        iterations,
        certificate_gap: cert,
        converged: cert <= opts.tol,
        boundary,
    })
}

fn certificate(set: &FeasibleSet, x: &DVector<f64>, g: &DVector<f64>) -> f64 {
    (set.project(&(x + g)) - x).amax()
}

/// Newton steps on the face `{v_i = 0 for inactive i}` using the analytic
/// Hessian blocks; a step is taken only if it stays nonnegative and does not
/// decrease the objective.
fn newton_refine(ch: &PostChannel, obj: &Objective, set: &FeasibleSet, x: &mut DVector<f64>, rounds: usize) {
    let (nx, ny) = (ch.x_size(), ch.y_size());
    let n = nx * ny;
    for _ in 0..rounds {
        let free: Vec<usize> = (0..n).filter(|&i| x[i] > 1e-12).collect();
        let Ok(state) = JointInputState::new(ch, DMatrix::from_vec(nx, ny, x.as_slice().to_vec())) else {
            return;
        };
        let Ok(blocks) = hessian_blocks(ch, &state) else { return };
        let mut h = DMatrix::zeros(n, n);
        for (s, b) in blocks.iter().enumerate() {
            h.view_mut((s * nx, s * nx), (nx, nx)).copy_from(b);
        }
        let g = DVector::from_vec(obj.gradient(x.as_slice()).0);
        let m = set.b_mat.nrows();
        let k = free.len();
        // KKT system on the free coordinates.
        let mut kkt = DMatrix::zeros(k + m, k + m);
        let mut rhs = DVector::zeros(k + m);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                kkt[(a, b)] = h[(i, j)];
            }
            for r in 0..m {
                kkt[(a, k + r)] = set.b_mat[(r, i)];
                kkt[(k + r, a)] = set.b_mat[(r, i)];
            }
            rhs[a] = -g[i];
        }
        let resid = &set.b_mat * &*x - &set.b_rhs;
        for r in 0..m {
            rhs[k + r] = -resid[r];
        }
        let sol = pseudo_inverse(&kkt, 1e-14) * rhs;
        let mut cand = x.clone();
        for (a, &i) in free.iter().enumerate() {
            cand[i] += sol[a];
        }
        if cand.min() < 0.0 {
            return;
        }
        if obj.value(cand.as_slice()) + 1e-15 < obj.value(x.as_slice()) {
            return;
        }
        let change = (&cand - &*x).amax();
        *x = cand;
        if change < 1e-15 {
            return;
        }
    }
}

/// Dispersion of maximizers found from random feasible starts.
#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    /// Largest pairwise total-variation distance among converged restarts.
    pub max_tv: f64,
    /// Largest distance from a restart maximizer to the reference result.
    pub max_tv_to_reference: f64,
    /// Restarts excluded because they did not converge.
    pub excluded: Vec<usize>,
}

pub fn uniqueness_probe(
    ch: &PostChannel,
    result: &FeedbackResult,
    restarts: usize,
    seed: u64,
    opts: &FcapOptions,
) -> Result<UniquenessReport> {
    let outcomes: Vec<Result<FeedbackResult>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
            let start = random_feasible(ch, &mut rng)?;
            solve_fcap_with(ch, opts, Some(&start))
        })
        .collect();
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(res) if res.converged => kept.push(res),
            _ => excluded.push(r),
        }
    }
    let tv = |a: &FeedbackResult, b: &FeedbackResult| {
        total_variation(a.maximizer.matrix().iter(), b.maximizer.matrix().iter())
    };
    let mut max_tv: f64 = 0.0;
    for i in 0..kept.len() {
        for j in i + 1..kept.len() {
            max_tv = max_tv.max(tv(&kept[i], &kept[j]));
        }
    }
    let max_tv_to_reference = kept.iter().map(|k| tv(k, result)).fold(0.0, f64::max);
    Ok(UniquenessReport {
        max_tv,
        max_tv_to_reference,
        excluded,
    })
}

/// Keep only the inputs in `subset` (`|subset| = |Y|`), refusing any state
/// whose restricted kernel is singular.
pub fn support_restriction(ch: &PostChannel, subset: &[usize]) -> Result<PostChannel> {
    if subset.len() != ch.y_size() {
        return Err(Error::Precondition(format!(
            "support set must have |Y| = {} symbols, got {}",
            ch.y_size(),
            subset.len()
        )));
    }
    let restricted = ch.select_inputs(subset)?;
    for s in 0..ch.y_size() {
        let smin = sigma_min(restricted.kernel(s));
        if smin <= SINGULAR_CUTOFF {
            return Err(Error::Singular {
                what: format!("restricted kernel for state y'={s}"),
                sigma_min: smin,
            });
        }
    }
    Ok(restricted)
}

/// The construction `p'_{y'}(S) = (Q^(c)_{y'}(S))^{-1} q*_{y'}` that moves all
/// input mass onto `S` while keeping the output kernel.
pub fn restricted_conditional(ch: &PostChannel, subset: &[usize], output_kernel: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let restricted = support_restriction(ch, subset)?;
    let mut cond = DMatrix::zeros(ch.x_size(), ch.y_size());
    for s in 0..ch.y_size() {
        let inv = checked_inverse(restricted.kernel(s), &format!("restricted kernel for state y'={s}"))?;
        let p = inv * output_kernel.column(s);
        for (i, &x) in subset.iter().enumerate() {
            cond[(x, s)] = p[i];
        }
    }
    Ok(cond)
}
