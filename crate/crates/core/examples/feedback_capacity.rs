// Feedback capacity of a POST channel, compared with the capacity of its
// reference channel, plus a uniqueness probe from random starts.

use std::error::Error;

use postcap::channel::proximity;
use postcap::feedback::{solve_fcap, uniqueness_probe, FcapOptions};
use postcap::memoryless::capacity_iteration;
use postcap::build_example;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    for eps in [0.0, 0.02, 0.05] {
        let (ch, w) = build_example(1, eps)?;
        let res = solve_fcap(&ch, 1e-9, 200_000)?;
        let c = capacity_iteration(&w, 1e-12, 100_000)?.capacity_nats;
        println!(
            "eps {eps:.2}: delta {:.4}, C_f = {:.9}, C(W) = {:.9}, gap {:.1e} after {} iterations",
            proximity(&ch, &w)?.delta,
            res.c_f_nats,
            c,
            res.certificate_gap,
            res.iterations
        );
        println!("  P*_Y' = {:.6?}", res.stationary.as_slice());
        if eps == 0.05 {
            let probe = uniqueness_probe(&ch, &res, 8, 0, &FcapOptions::default())?;
            println!("  8 random restarts: max TV between maximizers {:.2e}", probe.max_tv);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
