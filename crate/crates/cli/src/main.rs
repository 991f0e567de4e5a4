//! `uclab`: run uniform-convergence experiments, verifiers and calculators.
//!
//! Exit status: 0 when everything ran and every verification passed, 2 when a
//! verification failed, 1 on any error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "uclab", version, about = "Uniform convergence experiments for stochastic minimax problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config; built-in defaults for the subcommand when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Parent directory for `<subcommand>-<timestamp>/`.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,

    /// Overrides the base seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads.
    #[arg(long, global = true, env = "UCLAB_THREADS")]
    threads: Option<usize>,

    /// Override a config field, e.g. `--set net.radius=0.2`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// NC-SC uniform-convergence curve and rate fit.
    UcNcsc,
    /// NC-C (Moreau-envelope) uniform-convergence curve and rate fit.
    UcNcc,
    /// Replace-one stability check against 4G/(mu n).
    Stability,
    /// Prox-point perturbation under y-regularization.
    LemmaProx,
    /// Optimization / generalization split of a baseline solver's output.
    Decompose,
    /// Sub-Gaussian tail frequencies of the gradient deviation.
    Tails,
    /// Sample-size calculator; prints JSON.
    Calc,
    /// Quick built-in checks.
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::UcNcsc => "uc-ncsc",
            Command::UcNcc => "uc-ncc",
            Command::Stability => "stability",
            Command::LemmaProx => "lemma-prox",
            Command::Decompose => "decompose",
            Command::Tails => "tails",
            Command::Calc => "calc",
            Command::Selftest => "selftest",
        }
    }
}

/// Anything that ends the run with a nonzero status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn error(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<uclab::Error> for Failure {
    fn from(e: uclab::Error) -> Self {
        Failure::error(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let opts = commands::RunOptions {
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
        overrides: cli.overrides,
    };
    match commands::run(cli.command, &opts) {
        Ok(passed) => {
            if passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("verification FAILED");
                ExitCode::from(2)
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
