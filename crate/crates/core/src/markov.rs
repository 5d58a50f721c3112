//! Finite Markov chains given by column-stochastic kernels `K(y, y') = P(y | y')`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Adjacency `adj[from]` listing every `to` with a positive edge weight.
pub(crate) fn reachable_from(adj: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

/// Strong connectivity of a directed graph with at least one node.
pub(crate) fn strongly_connected(adj: &[Vec<usize>]) -> bool {
    let n = adj.len();
    if n == 0 {
        return true;
    }
    if !reachable_from(adj, 0).iter().all(|&b| b) {
        return false;
    }
    let mut rev = vec![Vec::new(); n];
    for (v, outs) in adj.iter().enumerate() {
        for &w in outs {
            rev[w].push(v);
        }
    }
    reachable_from(&rev, 0).iter().all(|&b| b)
}

fn kernel_graph(k: &DMatrix<f64>) -> Vec<Vec<usize>> {
    (0..k.ncols())
        .map(|from| (0..k.nrows()).filter(|&to| k[(to, from)] > 0.0).collect())
        .collect()
}

/// Closed communicating classes, each sorted, ordered by smallest member.
pub fn closed_classes(k: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let adj = kernel_graph(k);
    let n = adj.len();
    let reach: Vec<Vec<bool>> = (0..n).map(|v| reachable_from(&adj, v)).collect();
    let mut assigned = vec![false; n];
    let mut classes = Vec::new();
    for v in 0..n {
        if assigned[v] {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&w| reach[v][w] && reach[w][v]).collect();
        for &w in &class {
            assigned[w] = true;
        }
        // Closed: everything reachable from v is inside the class.
        if (0..n).all(|w| !reach[v][w] || class.contains(&w)) {
            classes.push(class);
        }
    }
    classes
}

/// Stationary distribution of a column-stochastic kernel.
#[derive(Debug, Clone)]
pub struct Stationary {
    pub distribution: DVector<f64>,
    /// False when the chain has several closed classes; the distribution is
    /// then the one supported on the first closed class.
    pub unique: bool,
    pub residual: f64,
}

pub fn stationary_distribution(k: &DMatrix<f64>) -> Result<Stationary> {
    if !k.is_square() {
        return Err(Error::Dimension("kernel must be square".into()));
    }
    let n = k.nrows();
    let classes = closed_classes(k);
    let class = classes
        .first()
        .ok_or_else(|| Error::Precondition("kernel has no closed class".into()))?;
    let m = class.len();
    // (K_CC - I) pi = 0 with the last equation replaced by sum(pi) = 1.
    let mut a = DMatrix::from_fn(m, m, |i, j| {
        k[(class[i], class[j])] - if i == j { 1.0 } else { 0.0 }
    });
    let mut b = DVector::zeros(m);
    for j in 0..m {
        a[(m - 1, j)] = 1.0;
    }
    b[m - 1] = 1.0;
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Singular {
            what: "stationary system".into(),
            sigma_min: 0.0,
        })?;
    let mut pi = DVector::zeros(n);
    for (i, &c) in class.iter().enumerate() {
        pi[c] = sol[i].max(0.0);
    }
    let s = pi.sum();
    pi /= s;
    let residual = (k * &pi - &pi).amax();
    Ok(Stationary {
        distribution: pi,
        unique: classes.len() == 1,
        residual,
    })
}
