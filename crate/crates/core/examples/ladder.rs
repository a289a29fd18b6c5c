//! Prints the ablation ladder on the desk benchmark.
//!
//! `cargo run --release -p mlcil-core --example ladder -- [key=value ...]`

use std::time::Instant;

use mlcil_core::ablation::{ablation_ladder, ladder_csv};
use mlcil_core::config::parse_config_str;

fn main() -> mlcil_core::Result<()> {
    let overrides: Vec<String> = std::env::args().skip(1).collect();
    let config = parse_config_str("", &overrides)?;
    let seeds: Vec<u64> = (0..5).collect();
    let start = Instant::now();
    let rows = ablation_ladder(&config, &seeds)?;
    print!("{}", ladder_csv(&rows));
    eprintln!("{:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
