// Capacity of memoryless channels and the surjectivity test.

use std::error::Error;

use postcap::memoryless::{capacity_iteration, surjectivity_check, DEFAULT_SUPPORT_TOL};
use postcap::{build_example, MemorylessChannel};

fn describe(name: &str, w: &MemorylessChannel) -> Result<(), Box<dyn Error>> {
    let prof = capacity_iteration(w, 1e-12, 100_000)?;
    let surj = surjectivity_check(w, &prof, DEFAULT_SUPPORT_TOL)?;
    println!("{name}");
    println!("  C = {:.9} nats, gap {:.1e}, {} iterations", prof.capacity_nats, prof.gap, prof.iterations);
    println!("  P_X = {:.6?}", prof.p_x);
    println!("  {}", surj.verdict);
    let t = surj.thresholds;
    println!(
        "  thresholds: indec {:.4}, conn {:.4}, fullrank {:.4}, fullrank_S {:.4}",
        t.indec, t.conn, t.fullrank, t.fullrank_s
    );
    Ok(())
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    describe("BSC(0.1)", &MemorylessChannel::binary_symmetric(0.1)?)?;
    describe("asymmetric 2x2", &MemorylessChannel::from_rows(2, 2, &[0.9, 0.2, 0.1, 0.8])?)?;
    // A third input that the optimum never uses.
    describe("2 outputs, 3 inputs", &MemorylessChannel::from_rows(2, 3, &[0.9, 0.2, 0.5, 0.1, 0.8, 0.5])?)?;
    describe("example 1 reference", &build_example(1, 0.0)?.1)?;
    describe("example 2 reference", &build_example(2, 0.0)?.1)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
