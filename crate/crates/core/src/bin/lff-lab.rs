use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lff_lab::experiments::{aggregate, execute, exit, ExperimentConfig, EXPERIMENTS};
use lff_lab::Error;

#[derive(Parser)]
#[command(name = "lff-lab", version, about = "Run learned Fourier feature experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Run only this seed instead of the config's list.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: the config's out_dir, else runs/<experiment>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the available experiments.
    List,
    /// Average per-seed CSVs of a finished run into *_agg.csv files.
    Aggregate { dir: PathBuf },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn run(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> ExitCode {
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return code(exit::CONFIG);
        }
    };
    let mut cfg = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return code(exit::CONFIG);
        }
    };
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    let dir = out
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.experiment));
    let outcome = match execute(&cfg) {
        Ok(o) => o,
        Err(Error::Config(msg)) => {
            eprintln!("error: {msg}");
            return code(exit::CONFIG);
        }
        Err(e) => {
            eprintln!("internal error: {e}");
            return code(exit::INTERNAL);
        }
    };
    if let Err(e) = outcome.write(&dir) {
        eprintln!("internal error: writing {}: {e}", dir.display());
        return code(exit::INTERNAL);
    }
    print!("{}", outcome.summary());
    println!("results in {}", dir.display());
    code(outcome.exit_code())
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, seed, out } => run(config, seed, out),
        Command::List => {
            for d in EXPERIMENTS {
                println!("{:<20} {}", d.name, d.description);
            }
            code(exit::OK)
        }
        Command::Aggregate { dir } => match aggregate(&dir) {
            Ok(files) => {
                for f in files {
                    println!("{}", f.display());
                }
                code(exit::OK)
            }
            Err(Error::Config(msg)) => {
                eprintln!("error: {msg}");
                code(exit::CONFIG)
            }
            Err(e) => {
                eprintln!("internal error: {e}");
                code(exit::INTERNAL)
            }
        },
    }
}
