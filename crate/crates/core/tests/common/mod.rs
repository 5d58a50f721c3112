#![allow(dead_code)]

use nalgebra::DMatrix;
use postcap::spec_file::load_channel_file;
use postcap::{MemorylessChannel, PostChannel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Column-stochastic `rows x cols` matrix from normalized exponential weights.
pub fn random_stochastic<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(rows, cols, |_, _| -(1.0 - rng.random::<f64>()).ln());
    for c in 0..cols {
        let s = m.column(c).sum();
        m.column_mut(c).unscale_mut(s);
    }
    m
}

/// Like [`random_stochastic`] but each entry is zero with probability `p_zero`
/// (one entry per column is always kept).
pub fn random_sparse_stochastic<R: Rng>(rng: &mut R, rows: usize, cols: usize, p_zero: f64) -> DMatrix<f64> {
    let mut m = random_stochastic(rng, rows, cols);
    for c in 0..cols {
        let keep = rng.random_range(0..rows);
        for r in 0..rows {
            if r != keep && rng.random::<f64>() < p_zero {
                m[(r, c)] = 0.0;
            }
        }
        let s = m.column(c).sum();
        m.column_mut(c).unscale_mut(s);
    }
    m
}

pub fn random_post<R: Rng>(rng: &mut R, nx: usize, ny: usize) -> PostChannel {
    PostChannel::new((0..ny).map(|_| random_stochastic(rng, ny, nx)).collect()).unwrap()
}

/// Zero-column-sum direction with max-abs entry 1.
pub fn random_direction<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut u = DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() - 0.5);
    for c in 0..cols {
        let mean = u.column(c).mean();
        u.column_mut(c).add_scalar_mut(-mean);
    }
    let scale = u.amax();
    u / scale
}

/// `Q_{y'} = W + delta U_{y'}` with a fresh direction per state.
pub fn perturbed<R: Rng>(rng: &mut R, w: &MemorylessChannel, delta: f64) -> PostChannel {
    let kernels = (0..w.y_size())
        .map(|_| w.matrix() + random_direction(rng, w.y_size(), w.x_size()) * delta)
        .collect();
    PostChannel::new(kernels).unwrap()
}

/// `I(X; Y)` for input law `p` computed from scratch.
pub fn mutual_information(w: &DMatrix<f64>, p: &[f64]) -> f64 {
    let q: Vec<f64> = (0..w.nrows()).map(|y| (0..w.ncols()).map(|x| w[(y, x)] * p[x]).sum()).collect();
    let mut total = 0.0;
    for x in 0..w.ncols() {
        for y in 0..w.nrows() {
            let v = w[(y, x)];
            if v > 0.0 && p[x] > 0.0 {
                total += p[x] * v * (v / q[y]).ln();
            }
        }
    }
    total
}

/// Stationary `I(X; Y | Y')` of a 2x2 POST channel driven by
/// `P(X = 0 | Y' = 0) = a`, `P(X = 0 | Y' = 1) = b`.
pub fn stationary_rate_2x2(ch: &PostChannel, a: f64, b: f64) -> f64 {
    let cond = [[a, 1.0 - a], [b, 1.0 - b]];
    // Output kernel columns.
    let out: Vec<Vec<f64>> = (0..2)
        .map(|s| (0..2).map(|y| (0..2).map(|x| ch.prob(y, x, s) * cond[s][x]).sum()).collect())
        .collect();
    // Two-state chain: pi_0 = P(0|1) / (P(1|0) + P(0|1)).
    let (p10, p01) = (out[0][1], out[1][0]);
    let pi0 = if p10 + p01 > 0.0 { p01 / (p10 + p01) } else { 0.5 };
    let pi = [pi0, 1.0 - pi0];
    let mut total = 0.0;
    for s in 0..2 {
        let mut mi = 0.0;
        for x in 0..2 {
            for y in 0..2 {
                let v = ch.prob(y, x, s);
                if v > 0.0 && cond[s][x] > 0.0 {
                    mi += cond[s][x] * v * (v / out[s][y]).ln();
                }
            }
        }
        total += pi[s] * mi;
    }
    total
}

pub fn channel_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("channels")
}

pub fn grid_capacity(w: &DMatrix<f64>) -> f64 {
    let steps = 20_000;
    (0..=steps)
        .map(|i| {
            let p = i as f64 / steps as f64;
            mutual_information(w, &[p, 1.0 - p])
        })
        .fold(f64::NEG_INFINITY, f64::max)
}


pub fn two_input_corpus() -> Vec<DMatrix<f64>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(channel_dir()).unwrap() {
        let (ch, w) = load_channel_file(entry.unwrap().path()).unwrap();
        if ch.x_size() != 2 {
            continue;
        }
        out.extend(ch.kernels().iter().cloned());
        out.extend(w.map(|w| w.matrix().clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for ny in 2..=4 {
        for _ in 0..5 {
            out.push(random_stochastic(&mut rng, ny, 2));
            out.push(random_sparse_stochastic(&mut rng, ny, 2, 0.4));
        }
    }
    out
}


pub fn manifold_grid(ch: &PostChannel) -> f64 {
    let coarse = 200;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..=coarse {
        for j in 0..=coarse {
            let (a, b) = (i as f64 / coarse as f64, j as f64 / coarse as f64);
            let v = stationary_rate_2x2(ch, a, b);
            if v > best.0 {
                best = (v, a, b);
            }
        }
    }
    // Local refinement around the coarse maximizer.
    let h = 1.0 / coarse as f64;
    let fine = 100;
    for i in 0..=fine {
        for j in 0..=fine {
            let a = (best.1 - h + 2.0 * h * i as f64 / fine as f64).clamp(0.0, 1.0);
            let b = (best.2 - h + 2.0 * h * j as f64 / fine as f64).clamp(0.0, 1.0);
            best.0 = best.0.max(stationary_rate_2x2(ch, a, b));
        }
    }
    best.0
}


pub fn three_2x2_channels() -> Vec<PostChannel> {
    vec![
        PostChannel::new(vec![
            DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.1, 0.8]),
            DMatrix::from_row_slice(2, 2, &[0.7, 0.4, 0.3, 0.6]),
        ])
        .unwrap(),
        PostChannel::new(vec![
            DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.3, 0.7]),
            DMatrix::from_row_slice(2, 2, &[0.55, 0.45, 0.45, 0.55]),
        ])
        .unwrap(),
        PostChannel::new(vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 0.5]),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.5, 1.0]),
        ])
        .unwrap(),
    ]
}


pub fn brute_nfold(ch: &PostChannel, y0: usize, n: usize) -> DMatrix<f64> {
    let (nx, ny) = (ch.x_size(), ch.y_size());
    let digits = |mut i: usize, base: usize| {
        let mut d = vec![0; n];
        for t in (0..n).rev() {
            d[t] = i % base;
            i /= base;
        }
        d
    };
    DMatrix::from_fn(ny.pow(n as u32), nx.pow(n as u32), |r, c| {
        let (ys, xs) = (digits(r, ny), digits(c, nx));
        let mut prev = y0;
        let mut p = 1.0;
        for t in 0..n {
            p *= ch.prob(ys[t], xs[t], prev);
            prev = ys[t];
        }
        p
    })
}
