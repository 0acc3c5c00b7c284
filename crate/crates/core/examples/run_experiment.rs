//! Runs a registered experiment from the library: parse a config with
//! overrides, execute every seed, write the results and aggregate them.
//!
//! `cargo run --release --example run_experiment -- /tmp/contraction-run`

use std::path::PathBuf;

use lff_lab::experiments::{aggregate, execute, ExperimentConfig, EXPERIMENTS};

fn main() -> lff_lab::Result<()> {
    for def in EXPERIMENTS {
        println!("{:<20} {}", def.name, def.description);
    }
    let cfg = ExperimentConfig::parse(
        r#"
experiment = "contraction"
seeds = [0, 1, 2]

[kernel]
points = 61
gamma = 0.95
"#,
    )?;
    let outcome = execute(&cfg)?;
    print!("{}", outcome.summary());
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("lff-contraction"));
    outcome.write(&dir)?;
    for f in aggregate(&dir)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}
