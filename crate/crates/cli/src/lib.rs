//! Batch experiment driver for `polyheat`.
//!
//! Experiments are described by flat `key = value` configs (see [`config`])
//! and write CSV tables. Values never depend on the worker count.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod csv;
pub mod experiments;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{Config, ConfigError, ConfigResult};
pub use experiments::{run, Outcome, EXPERIMENTS};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Runs an experiment on a dedicated pool of `threads` workers.
pub fn run_with_threads(cfg: &Config, threads: Option<usize>) -> ConfigResult<Outcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| ConfigError::Io(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run(cfg))
}

#[derive(Debug, Parser)]
#[command(name = "polyheat", version, about = "Heat kernels from geodesic polygons")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Error ladder against the spectral oracle.
    Converge(RunArgs),
    /// Domination by the scalar comparison kernel.
    Hsu(RunArgs),
    /// Weighted kernel trace against the spectral trace.
    Trace(RunArgs),
    /// Gaussian second-moment identity.
    #[command(name = "lemma-a")]
    LemmaA(RunArgs),
    /// Dump kernel rows.
    Kernel(RunArgs),
    /// Apply the composed kernels on the grid or by Monte Carlo.
    Propagate(RunArgs),
    /// Holonomy around a closed polygon.
    Holonomy(RunArgs),
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Override a config entry, `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl Command {
    fn parts(&self) -> (&'static str, &RunArgs) {
        match self {
            Command::Converge(a) => ("converge", a),
            Command::Hsu(a) => ("hsu", a),
            Command::Trace(a) => ("trace", a),
            Command::LemmaA(a) => ("lemma-a", a),
            Command::Kernel(a) => ("kernel", a),
            Command::Propagate(a) => ("propagate", a),
            Command::Holonomy(a) => ("holonomy", a),
        }
    }
}

/// Resolves the config for a command line: file, then `--set`, then flags.
pub fn resolve(cmd: &Command) -> ConfigResult<Config> {
    let (name, args) = cmd.parts();
    let mut cfg = match &args.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    cfg.apply_overrides(args.set.iter().map(String::as_str))?;
    if let Some(seed) = args.seed {
        cfg.set("mc.seed", &seed.to_string())?;
    }
    if let Some(out) = &args.out {
        cfg.set("out", &out.to_string_lossy())?;
    }
    match cfg.get("experiment") {
        Some(e) if e != name => {
            return Err(ConfigError::Value {
                key: "experiment".into(),
                msg: format!("config is for {e:?} but the subcommand is {name:?}"),
            })
        }
        _ => cfg.set("experiment", name)?,
    }
    Ok(cfg)
}

/// Entry point shared by the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let threads = cli.command.parts().1.threads;
    let cfg = match resolve(&cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    let outcome = match run_with_threads(&cfg, threads) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    match cfg.get("out") {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &outcome.csv) {
                eprintln!("cannot write {path}: {e}");
                return EXIT_CONFIG;
            }
        }
        None => print!("{}", outcome.csv),
    }
    let verdict = if outcome.passed { "PASS" } else { "FAIL" };
    eprintln!("{verdict} {}: {}", cfg.str_or("experiment", "?"), outcome.summary);
    if outcome.passed {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}
