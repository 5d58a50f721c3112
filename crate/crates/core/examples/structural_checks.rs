// Indecomposability and connectedness of POST channels.

use std::error::Error;

use nalgebra::DMatrix;
use postcap::memoryless::{check_connected, check_indecomposable_sufficient, connectivity_bound_holds, scrambling_coefficient};
use postcap::{build_example, PostChannel};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let (ch, w) = build_example(1, 0.05)?;
    let ind = check_indecomposable_sufficient(&ch, &w)?;
    println!(
        "example 1 at eps = 0.05: delta {:.4} vs bound {:.4}, scrambling {:.4?} -> indecomposable: {}",
        ind.delta, ind.bound, ind.scrambling, ind.holds
    );
    let (by_bound, delta, bound) = connectivity_bound_holds(&ch, &w)?;
    println!("  connectivity bound {by_bound} ({delta:.4} < {bound:.4}), graph test {}", check_connected(&ch));

    // Output 1 is absorbing: no input leaves it.
    let frozen = PostChannel::new(vec![
        DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.0, 0.1]),
        DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]),
    ])?;
    println!("absorbing channel connected: {}", check_connected(&frozen));
    for x in 0..2 {
        println!("  lambda(Q_x={x}) = {:.3}", scrambling_coefficient(&frozen.state_matrix(x)?)?);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
