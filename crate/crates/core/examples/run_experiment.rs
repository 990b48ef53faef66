//! Runs a full experiment from a TOML config and writes the report directory.
//!
//! cargo run --release --example run_experiment -- configs/desk.toml out/desk

use std::path::PathBuf;

use dualsketch::harness::{run_experiment, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let config = PathBuf::from(args.next().unwrap_or_else(|| "configs/desk.toml".into()));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/experiment".into()));
    let cfg = ExperimentConfig::load(&config)?;
    let report = run_experiment(&cfg, Some(&out))?;
    print!("{}", report.body());
    println!("artifacts written to {}", out.display());
    Ok(())
}
