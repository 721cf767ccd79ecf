//! Runs every reproduction target and prints its text report.
//!
//! `cargo run --release --example repro_all [seed]`

use shiftscope::repro::{run, ReproTarget};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    for target in ReproTarget::ALL {
        let artifacts = run(target, seed, None)?;
        println!("== {target}\n{}", artifacts.text);
    }
    Ok(())
}
