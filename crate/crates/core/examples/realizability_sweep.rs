// Sweep both worked examples over eps and print the sweep CSV.

use std::error::Error;

use postcap::realizability::{parse_eps_grid, sweep_example, write_sweep_csv};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let grid = parse_eps_grid("0:0.1:0.025")?;
    for id in [1, 2] {
        println!("example {id}");
        let rows = sweep_example(id, &grid, 2);
        write_sweep_csv(&rows, std::io::stdout().lock())?;
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
