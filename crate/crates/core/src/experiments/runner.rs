use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::output::{write_seed, Check, SeedFailure, SeedRecord, Verdict};
use super::registry::find;
use crate::error::{Error, Result};

/// Process exit codes used by the command-line front end.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const ASSERTION: i32 = 2;
    pub const INTERNAL: i32 = 3;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Passed,
    Failed,
    InternalError,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub config: ExperimentConfig,
    pub records: Vec<SeedRecord>,
    pub checks: Vec<Check>,
    pub status: RunStatus,
    pub wall_seconds: f64,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            RunStatus::Passed => exit::OK,
            RunStatus::Failed => exit::ASSERTION,
            RunStatus::InternalError => exit::INTERNAL,
        }
    }

    /// `PASS`/`FAIL`/`INFO` lines followed by a status line.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&c.line());
            s.push('\n');
        }
        for r in &self.records {
            if let Err(f) = &r.result {
                let tag = if f.diverged { "diverged" } else { "error" };
                s.push_str(&format!("seed {} {tag}: {}\n", r.seed, f.message));
            }
        }
        let status = match self.status {
            RunStatus::Passed => "passed",
            RunStatus::Failed => "failed",
            RunStatus::InternalError => "internal error",
        };
        s.push_str(&format!("{}: {status}\n", self.config.experiment));
        s
    }

    /// Writes the resolved config, per-seed outputs, `summary.txt` and
    /// `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.toml"), self.config.to_toml()?)?;
        for r in &self.records {
            write_seed(dir, r)?;
        }
        fs::write(dir.join("summary.txt"), self.summary())?;
        let def = find(&self.config.experiment).expect("validated experiment");
        let failures: Vec<SeedFailureEntry> = self
            .records
            .iter()
            .filter_map(|r| r.result.as_ref().err().map(|f| SeedFailureEntry { seed: r.seed, failure: f }))
            .collect();
        let manifest = Manifest {
            experiment: def.name,
            description: def.description,
            version: env!("CARGO_PKG_VERSION"),
            seeds: &self.config.seeds,
            status: self.status,
            wall_seconds: self.wall_seconds,
            checks: &self.checks,
            failures,
            config: &self.config,
            rerun: "lff-lab run config.toml --out <dir>".into(),
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }
}

#[derive(Serialize)]
struct SeedFailureEntry<'a> {
    seed: u64,
    #[serde(flatten)]
    failure: &'a SeedFailure,
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    description: &'a str,
    version: &'a str,
    seeds: &'a [u64],
    status: RunStatus,
    /// The only field that differs between identical runs.
    wall_seconds: f64,
    checks: &'a [Check],
    failures: Vec<SeedFailureEntry<'a>>,
    config: &'a ExperimentConfig,
    rerun: String,
}

/// Runs every seed of `cfg` (in parallel on `cfg.workers` threads, 0 for
/// all cores) and judges the results. Seeds are independent streams, so
/// outputs do not depend on the worker count.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let def = find(&cfg.experiment).expect("validated experiment");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    let start = Instant::now();
    let records: Vec<SeedRecord> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| {
                let t = Instant::now();
                let result = (def.run_seed)(cfg, seed).map_err(|e| SeedFailure {
                    diverged: matches!(e, Error::Diverged { .. }),
                    message: e.to_string(),
                });
                SeedRecord {
                    seed,
                    wall_seconds: t.elapsed().as_secs_f64(),
                    result,
                }
            })
            .collect()
    });
    let internal = records.iter().any(|r| matches!(&r.result, Err(f) if !f.diverged));
    let mut checks = Vec::new();
    for r in &records {
        if let Err(f) = &r.result {
            if f.diverged {
                checks.push(Check::assert(&format!("seed {} finished", r.seed), false, f.message.clone()));
            }
        }
    }
    if !internal {
        checks.extend((def.judge)(cfg, &records));
    }
    let status = if internal {
        RunStatus::InternalError
    } else if checks.iter().any(|c| c.verdict == Verdict::Fail) {
        RunStatus::Failed
    } else {
        RunStatus::Passed
    };
    Ok(RunOutcome {
        config: cfg.clone(),
        records,
        checks,
        status,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}
