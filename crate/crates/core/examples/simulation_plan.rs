// Reproduce the optimal feedback output law without feedback: build the
// block plans, check them, and compare their rate with the feedback capacity.

use std::error::Error;

use nalgebra::DMatrix;
use postcap::memoryless::capacity_iteration;
use postcap::realizability::optimal_law;
use postcap::simulation::{build_plans_up_to, deviation_check, kappa_bound, plan_mutual_information, verify_plan};
use postcap::{MemorylessChannel, PostChannel};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let w = MemorylessChannel::from_rows(2, 2, &[0.9, 0.2, 0.1, 0.8])?;
    let ch = PostChannel::new(vec![
        w.matrix().clone(),
        DMatrix::from_row_slice(2, 2, &[0.901, 0.199, 0.099, 0.801]),
    ])?;
    let (fb, law) = optimal_law(&ch)?;
    println!("C_f = {:.12} nats", fb.c_f_nats);

    let plans = build_plans_up_to(&ch, &law, 6)?;
    for plan in &plans {
        let residual = verify_plan(&ch, plan, &law)?.max;
        let rate = plan_mutual_information(&ch, plan, &law)?;
        println!(
            "n = {}: min entry {:.4e}, residual {:.1e}, rate - C_f = {:+.1e}",
            plan.n,
            plan.min_entry,
            residual,
            rate - fb.c_f_nats
        );
    }

    let kappa = kappa_bound(&capacity_iteration(&w, 1e-13, 100_000)?, &w)?;
    let rep = deviation_check(&plans, kappa)?;
    println!(
        "largest relative gap between initial states {:.3e} (kappa bound {:.3})",
        rep.observed_max_deviation, rep.kappa_max
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
