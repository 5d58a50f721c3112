// Write a channel file, read it back, and measure how far it sits from its
// reference channel.

use std::error::Error;

use nalgebra::DMatrix;
use postcap::channel::proximity;
use postcap::spec_file::{load_channel_file, save_post_channel, ChannelSpecFile};
use postcap::{MemorylessChannel, PostChannel};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let w = MemorylessChannel::from_rows(2, 2, &[0.9, 0.2, 0.1, 0.8])?;
    let ch = PostChannel::new(vec![
        w.matrix().clone(),
        DMatrix::from_row_slice(2, 2, &[0.901, 0.199, 0.099, 0.801]),
    ])?;

    let dir = std::env::temp_dir().join(format!("postcap-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("near_pair.json");
    save_post_channel(&path, &ch, Some(&w))?;
    let (back, back_w) = load_channel_file(&path)?;
    assert_eq!(back, ch);
    println!("{}", std::fs::read_to_string(&path)?);

    let rep = proximity(&back, back_w.as_ref().expect("reference written above"))?;
    println!("delta = {:.3e}, per state = {:?}", rep.delta, rep.per_state);

    // Exact rationals are accepted as strings.
    let text = r#"{"input_size": 2, "output_size": 2,
        "kernels": [[["2/3", "1/4"], ["1/3", "3/4"]], [["2/3", "1/4"], ["1/3", "3/4"]]]}"#;
    let (rational, _) = ChannelSpecFile::from_json(text)?.to_channel()?;
    println!("rational file is memoryless: {}", rational.is_memoryless());

    // Column sums are checked on load.
    let bad = r#"{"input_size": 2, "output_size": 2,
        "kernels": [[[1, 0], [0, 1]], [[0.5, 0.3], [0.48, 0.7]]]}"#;
    let err = ChannelSpecFile::from_json(bad)?.to_channel().unwrap_err();
    println!("rejected: {err}");

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
