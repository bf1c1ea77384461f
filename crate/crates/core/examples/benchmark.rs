//! Runs the small benchmark grid and prints the summary CSV.

use std::path::PathBuf;

use belief_trees::bench::{run_benchmark, BenchmarkSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/bench_small.toml");
    let spec = BenchmarkSpec::load(path)?;
    let result = run_benchmark(&spec)?;
    print!("{}", result.to_csv()?);
    Ok(())
}
