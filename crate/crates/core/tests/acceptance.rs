//! One PASS/FAIL line per acceptance criterion; exits non-zero on any FAIL.

mod common;

use std::time::Instant;

use common::*;
use nalgebra::{DMatrix, DVector};
use postcap::cli::cmd_sweep;
use postcap::feedback::{gradient, hessian_blocks, objective, random_feasible};
use postcap::linalg::max_symmetric_eigenvalue;
use postcap::lp::DEFAULT_LP_TOL;
use postcap::memoryless::{
    capacity_iteration, check_connected, connectivity_bound_holds, scrambling_coefficient, surjectivity_check,
    DEFAULT_SUPPORT_TOL,
};
use postcap::realizability::{d_metric, lp_feasibility, lstsq_projection, optimal_law, parse_eps_grid, LpVerdict};
use postcap::simulation::{build_plan, build_plans_up_to, markov_output_vector, nfold_matrix, plan_mutual_information, verify_plan};
use postcap::{build_example, solve_fcap, JointInputState, MemorylessChannel, PostChannel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn degenerate_channels_recover_memoryless_capacity() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_value, mut worst_tv, mut built) = (0.0f64, 0.0f64, 0);
    while built < 10 {
        let size = 2 + built % 2;
        let w = MemorylessChannel::new(random_stochastic(&mut rng, size, size)).map_err(err)?;
        let prof = capacity_iteration(&w, 1e-14, 1_000_000).map_err(err)?;
        if !surjectivity_check(&w, &prof, DEFAULT_SUPPORT_TOL).map_err(err)?.is_surjective {
            continue;
        }
        built += 1;
        let res = solve_fcap(&PostChannel::degenerate(&w), 1e-9, 200_000).map_err(err)?;
        worst_value = worst_value.max((res.c_f_nats - prof.capacity_nats).abs());
        let product = DMatrix::from_fn(size, size, |x, s| prof.p_x[x] * prof.p_y[s]);
        let tv = 0.5 * (res.maximizer.matrix() - product).abs().sum();
        worst_tv = worst_tv.max(tv);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst_value <= 1e-8, || format!("value error {worst_value:.2e} > 1e-8"))?;
    ensure(worst_tv <= 1e-6, || format!("maximizer TV {worst_tv:.2e} > 1e-6"))?;
    ensure(secs <= 10.0, || format!("took {secs:.1} s > 10 s"))?;
    Ok(format!("max value error {worst_value:.1e}, max TV {worst_tv:.1e}, {secs:.2} s"))
}

fn near_memoryless_plans_are_valid_and_optimal() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w = MemorylessChannel::from_rows(2, 2, &[0.9, 0.2, 0.1, 0.8]).map_err(err)?;
    let (mut min_entry, mut worst_residual, mut worst_rate) = (f64::INFINITY, 0.0f64, 0.0f64);
    for dir in 0..20 {
        let ch = perturbed(&mut rng, &w, 1e-3);
        let (fb, law) = optimal_law(&ch).map_err(err)?;
        let reference = solve_fcap(&ch, 1e-9, 200_000).map_err(err)?.c_f_nats;
        for plan in build_plans_up_to(&ch, &law, 8).map_err(err)? {
            ensure(plan.is_valid(), || format!("direction {dir}, n = {}: {:?}", plan.n, plan.validity))?;
            min_entry = min_entry.min(plan.min_entry);
            worst_residual = worst_residual.max(verify_plan(&ch, &plan, &law).map_err(err)?.max);
            let rate = plan_mutual_information(&ch, &plan, &law).map_err(err)?;
            worst_rate = worst_rate.max((rate - fb.c_f_nats).abs()).max((rate - reference).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(min_entry > 0.0, || format!("min entry {min_entry:e}"))?;
    ensure(worst_residual <= 1e-10, || format!("residual {worst_residual:.2e} > 1e-10"))?;
    ensure(worst_rate <= 1e-7, || format!("rate gap {worst_rate:.2e} > 1e-7"))?;
    ensure(secs <= 60.0, || format!("took {secs:.1} s > 60 s"))?;
    Ok(format!(
        "min entry {min_entry:.3e}, residual {worst_residual:.1e}, rate gap {worst_rate:.1e}, {secs:.2} s"
    ))
}

/// Independent check of a separator against `Q^(n)_{y0}` and `q^(n)_{y0}`.
fn separator_certifies(ch: &PostChannel, law: &postcap::simulation::MarkovOutputLaw, y0: usize, c: &[f64]) -> Result<f64, String> {
    let q = nfold_matrix(ch, y0, 2).map_err(err)?;
    let target = markov_output_vector(law, y0, 2).map_err(err)?;
    let c = DVector::from_column_slice(c);
    let best = (0..q.ncols()).map(|j| c.dot(&q.column(j))).fold(f64::NEG_INFINITY, f64::max);
    Ok(c.dot(&target) - best)
}

fn example_sweep(id: u32) -> Result<Vec<(f64, PostChannel, postcap::simulation::MarkovOutputLaw, f64)>, String> {
    parse_eps_grid("0:0.1:0.005")
        .map_err(err)?
        .into_iter()
        .map(|eps| {
            let (ch, _) = build_example(id, eps).map_err(err)?;
            let (_, law) = optimal_law(&ch).map_err(err)?;
            let d = d_metric(&ch, &law, 2).map_err(err)?;
            Ok((eps, ch, law, d))
        })
        .collect()
}

fn example_1_is_not_realizable() -> Check {
    let start = Instant::now();
    let points = example_sweep(1)?;
    ensure(points.len() == 21, || format!("{} grid points", points.len()))?;
    let (mut min_d, mut min_margin) = (f64::INFINITY, f64::INFINITY);
    for (eps, ch, law, d) in &points {
        if *eps == 0.0 {
            ensure(*d <= 1e-10, || format!("D(0) = {d:.2e} > 1e-10"))?;
            continue;
        }
        ensure(*d > 1e-8, || format!("D({eps}) = {d:.2e} <= 1e-8"))?;
        min_d = min_d.min(*d);
        for y0 in 0..ch.y_size() {
            match lp_feasibility(ch, law, y0, 2, DEFAULT_LP_TOL).map_err(err)? {
                LpVerdict::Infeasible { separator, .. } => {
                    let margin = separator_certifies(ch, law, y0, &separator)?;
                    ensure(margin > 0.0, || format!("eps {eps}, y0 {y0}: separator margin {margin:e}"))?;
                    min_margin = min_margin.min(margin);
                }
                other => return Err(format!("eps {eps}, y0 {y0}: {other:?}")),
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs <= 120.0, || format!("took {secs:.1} s > 120 s"))?;
    Ok(format!(
        "D(0) = {:.1e}, min D(eps > 0) = {min_d:.2e}, min separator margin {min_margin:.2e}, {secs:.2} s",
        points[0].3
    ))
}

fn example_2_has_rank_4_and_positive_d() -> Check {
    let start = Instant::now();
    let points = example_sweep(2)?;
    let mut min_d = f64::INFINITY;
    for (eps, ch, law, d) in &points {
        for y0 in 0..ch.y_size() {
            let rank = lstsq_projection(ch, law, y0, 2).map_err(err)?.rank;
            ensure(rank == 4, || format!("eps {eps}, y0 {y0}: rank {rank}"))?;
        }
        if *eps > 0.0 {
            ensure(*d > 1e-8, || format!("D({eps}) = {d:.2e} <= 1e-8"))?;
            min_d = min_d.min(*d);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs <= 120.0, || format!("took {secs:.1} s > 120 s"))?;
    Ok(format!("rank 4 at all {} points, min D(eps > 0) = {min_d:.2e}, {secs:.2} s", points.len()))
}

fn hessian_and_gradient_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-6;
    let (mut max_eig, mut max_flat, mut max_fd, mut max_euler) = (f64::NEG_INFINITY, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10 {
        let (nx, ny) = (rng.random_range(2..=3), rng.random_range(2..=3));
        let ch = random_post(&mut rng, nx, ny);
        for _ in 0..100 {
            let p = random_feasible(&ch, &mut rng).map_err(err)?;
            let m = p.matrix();
            for (s, block) in hessian_blocks(&ch, &p).map_err(err)?.iter().enumerate() {
                max_eig = max_eig.max(max_symmetric_eigenvalue(block));
                let v = m.column(s);
                max_flat = max_flat.max((v.transpose() * block * v)[(0, 0)].abs());
            }
            let g = gradient(&ch, &p).values;
            let f0 = objective(&ch, &p);
            max_euler = max_euler.max((g.dot(m) - f0).abs());
            // Coordinate directions moved onto the simplex: e_i - 1/n.
            let n = (nx * ny) as f64;
            let mean = g.mean();
            for i in 0..nx * ny {
                let mut d = DMatrix::from_element(nx, ny, -1.0 / n);
                d[i] += 1.0;
                let plus = JointInputState::new(&ch, m + &d * h).map_err(err)?;
                let minus = JointInputState::new(&ch, m - &d * h).map_err(err)?;
                let fd = (objective(&ch, &plus) - objective(&ch, &minus)) / (2.0 * h);
                max_fd = max_fd.max((fd - (g[i] - mean)).abs());
            }
        }
    }
    ensure(max_eig <= 1e-9, || format!("max eigenvalue {max_eig:.2e} > 1e-9"))?;
    ensure(max_flat <= 1e-12, || format!("|v^T H v| = {max_flat:.2e} > 1e-12"))?;
    ensure(max_fd <= 1e-5, || format!("finite-difference gap {max_fd:.2e} > 1e-5"))?;
    ensure(max_euler <= 1e-12, || format!("<g, P> - I = {max_euler:.2e}"))?;
    Ok(format!(
        "1000 points: max eigenvalue {max_eig:.1e}, |v^T H v| {max_flat:.1e}, finite differences {max_fd:.1e}"
    ))
}

fn oracle_equivalences() -> Check {
    // (a) capacity iteration against a simplex grid.
    let mut gap_a = 0.0f64;
    for m in two_input_corpus() {
        let w = MemorylessChannel::new(m.clone()).map_err(err)?;
        let c = capacity_iteration(&w, 1e-12, 100_000).map_err(err)?.capacity_nats;
        gap_a = gap_a.max((c - grid_capacity(&m)).abs());
    }
    ensure(gap_a <= 1e-5, || format!("(a) gap {gap_a:.2e} > 1e-5"))?;

    // (b) feedback capacity against the stationarity-manifold grid.
    let mut gap_b = 0.0f64;
    for ch in three_2x2_channels() {
        let c = solve_fcap(&ch, 1e-10, 200_000).map_err(err)?.c_f_nats;
        let g = manifold_grid(&ch);
        ensure(g <= c + 1e-9, || format!("(b) grid {g} beats solver {c}"))?;
        gap_b = gap_b.max(c - g);
    }
    ensure(gap_b <= 2e-4, || format!("(b) gap {gap_b:.2e} > 2e-4"))?;

    // (c) plan recursion against the explicit inverse; (d) LP witness against the plan.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut gap_c, mut gap_d) = (0.0f64, 0.0f64);
    let w = MemorylessChannel::from_rows(2, 2, &[0.9, 0.2, 0.1, 0.8]).map_err(err)?;
    let w3 = MemorylessChannel::new(DMatrix::from_row_slice(3, 3, &[0.8, 0.1, 0.1, 0.1, 0.7, 0.2, 0.1, 0.2, 0.7]))
        .map_err(err)?;
    for (base, delta) in [(&w, 1e-4), (&w, 1e-3), (&w, 1e-2), (&w3, 1e-3), (&w3, 1e-2)] {
        let ch = perturbed(&mut rng, base, delta);
        let (_, law) = optimal_law(&ch).map_err(err)?;
        for n in 1..=3 {
            let plan = build_plan(&ch, &law, n).map_err(err)?;
            for y0 in 0..ch.y_size() {
                let explicit = nfold_matrix(&ch, y0, n)
                    .map_err(err)?
                    .lu()
                    .solve(&markov_output_vector(&law, y0, n).map_err(err)?)
                    .ok_or("(c) singular n-fold matrix")?;
                let v = DVector::from_vec(plan.vectors[y0].clone());
                gap_c = gap_c.max((explicit - &v).amax());
                match lp_feasibility(&ch, &law, y0, n, DEFAULT_LP_TOL).map_err(err)? {
                    LpVerdict::Feasible { witness, .. } => {
                        gap_d = gap_d.max((DVector::from_vec(witness) - &v).amax());
                    }
                    other => return Err(format!("(d) delta {delta}, n {n}, y0 {y0}: {other:?}")),
                }
            }
        }
    }
    ensure(gap_c <= 1e-12, || format!("(c) gap {gap_c:.2e} > 1e-12"))?;
    ensure(gap_d <= 1e-8, || format!("(d) gap {gap_d:.2e} > 1e-8"))?;
    Ok(format!("(a) {gap_a:.1e} (b) {gap_b:.1e} (c) {gap_c:.1e} (d) {gap_d:.1e}"))
}

fn structural_checks() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let size = rng.random_range(2..=4);
        let a = random_sparse_stochastic(&mut rng, size, size, 0.4);
        let b = random_sparse_stochastic(&mut rng, size, size, 0.4);
        let lhs = scrambling_coefficient(&(&a * &b)).map_err(err)?;
        let rhs = scrambling_coefficient(&a).map_err(err)? * scrambling_coefficient(&b).map_err(err)?;
        worst = worst.max(lhs - rhs);
    }
    ensure(worst <= 1e-12, || format!("lambda(AB) exceeds lambda(A) lambda(B) by {worst:.2e}"))?;

    let (mut bound_held, mut disconnected) = (0, 0);
    for _ in 0..100 {
        let (nx, ny) = (rng.random_range(2..=3), rng.random_range(2..=3));
        let w = MemorylessChannel::new(random_sparse_stochastic(&mut rng, ny, nx, 0.8)).map_err(err)?;
        let t = rng.random::<f64>() * 0.6;
        // Every other channel gets kernels that keep output 0 absorbing.
        let absorbing = rng.random::<bool>();
        let kernels = (0..ny)
            .map(|s| {
                let mut k = w.matrix() * (1.0 - t) + random_sparse_stochastic(&mut rng, ny, nx, 0.8) * t;
                if absorbing && s == 0 {
                    k.fill(0.0);
                    k.row_mut(0).fill(1.0);
                }
                k
            })
            .collect();
        let ch = PostChannel::new(kernels).map_err(err)?;
        let (holds, delta, bound) = connectivity_bound_holds(&ch, &w).map_err(err)?;
        let connected = check_connected(&ch);
        ensure(!holds || connected, || format!("bound holds ({delta} < {bound}) but graph test says disconnected"))?;
        bound_held += holds as usize;
        disconnected += !connected as usize;
    }
    Ok(format!(
        "max lambda excess {worst:.1e}; bound held on {bound_held}/100 channels, {disconnected} disconnected, no contradiction"
    ))
}

fn sweep_is_deterministic() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let runs: Vec<Vec<u8>> = [None, None, Some(1), Some(3)]
        .into_iter()
        .enumerate()
        .map(|(i, jobs)| {
            let path = dir.path().join(format!("sweep{i}.csv"));
            cmd_sweep(1, "0:0.1:0.005", 2, &path, jobs).map_err(err)?;
            std::fs::read(&path).map_err(err)
        })
        .collect::<Result<_, _>>()?;
    ensure(runs.iter().all(|r| r == &runs[0]), || "CSV bytes differ between runs".into())?;
    Ok(format!("{} identical runs of {} bytes", runs.len(), runs[0].len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("degenerate channels recover memoryless capacity", degenerate_channels_recover_memoryless_capacity),
        ("near-memoryless simulation plans", near_memoryless_plans_are_valid_and_optimal),
        ("example 1 sweep is not realizable", example_1_is_not_realizable),
        ("example 2 sweep rank and D", example_2_has_rank_4_and_positive_d),
        ("Hessian and gradient suite", hessian_and_gradient_suite),
        ("oracle equivalences", oracle_equivalences),
        ("structural checks", structural_checks),
        ("sweep determinism", sweep_is_deterministic),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
