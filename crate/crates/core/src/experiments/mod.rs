//! Named, config-driven experiments with CSV output and PASS/FAIL checks.
//!
//! A config file names an experiment and overrides any of its preset
//! values. [`execute`] runs every seed, [`RunOutcome::write`] lays the
//! results out as
//!
//! ```text
//! <out>/config.toml      resolved config
//! <out>/manifest.json    experiment, version, status, checks, wall time
//! <out>/summary.txt      one PASS/FAIL/INFO line per check
//! <out>/seed-<n>/*.csv   per-seed tables and metrics.csv
//! ```
//!
//! and [`aggregate`] adds `<table>_agg.csv` files with mean and standard
//! error across seeds.

mod config;
mod mdp_runs;
mod ntk_runs;
mod output;
mod registry;
mod runner;

pub use config::{EnvConfig, ExperimentConfig, KernelConfig};
pub use ntk_runs::separated_sphere_points;
pub use output::{aggregate, seed_dir, Check, Field, SeedFailure, SeedOutput, SeedRecord, Table, Verdict};
pub use registry::{find, ExperimentDef, EXPERIMENTS};
pub use runner::{execute, exit, RunOutcome, RunStatus};
