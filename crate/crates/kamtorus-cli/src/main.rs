//! `kamtorus`: solve, certify, validate and export invariant tori.
//!
//! Exit codes: 0 success or certificate pass, 1 certificate failure or solver
//! divergence, 2 usage or validation error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Verdict;
use config::{Config, Mode, Overrides};

#[derive(Parser)]
#[command(name = "kamtorus", version, about = "Invariant tori of Hamiltonian systems with first integrals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file; every field is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Band limit per torus angle.
    #[arg(long)]
    bands: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { mode: self.mode, epsilon: self.epsilon, bands: self.bands }
    }

    fn load(&self) -> anyhow::Result<Config> {
        Config::load(self.config.as_deref(), &self.overrides())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the quasi-Newton method from the unperturbed torus.
    Solve(Common),
    /// Evaluate the a-posteriori hypothesis on a torus file.
    Certify {
        /// Torus file written by `solve`.
        #[arg(long)]
        torus: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Check the structural hypotheses of a system.
    Validate(Common),
    /// Export grid samples of a torus and its error history as CSV.
    Plotdata {
        #[arg(long)]
        torus: PathBuf,
        /// Convergence log; defaults to `convergence.jsonl` next to the torus.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("KAMTORUS_THREADS") {
        let n: usize = v.parse().map_err(|_| anyhow::anyhow!("KAMTORUS_THREADS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<Verdict> {
    configure_threads()?;
    match cli.command {
        Command::Solve(common) => commands::solve(&common.load()?, &common.out),
        Command::Certify { torus, common } => {
            let cfg = match &common.config {
                Some(_) => Some(common.load()?),
                None => common.mode.map(|mode| -> anyhow::Result<Config> {
                    let mut cfg = commands::TorusFile::read(&torus)?.config;
                    cfg.mode = mode;
                    Ok(cfg)
                }).transpose()?,
            };
            commands::certify(&torus, cfg, &common.out)
        }
        Command::Validate(common) => commands::validate(&common.load()?, &common.out),
        Command::Plotdata { torus, log, out } => commands::plotdata(&torus, log, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Verdict::Success) => ExitCode::SUCCESS,
        Ok(Verdict::Negative) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
