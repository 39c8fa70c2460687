//! `qpricing`: config-driven runner for the queue-pricing experiments.
//!
//! Exit codes: 0 ok, 1 runtime failure (including a failed `validate`
//! check), 2 bad config or arguments.

mod commands;
mod output;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use queue_pricing::config::{Experiment, ExperimentConfig};
use queue_pricing::Error;

#[derive(Parser)]
#[command(
    name = "qpricing",
    version,
    about = "Online pricing and staffing experiments for GI/GI/1 queues"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for replications (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the controller and write the averaged trajectory.
    Optimize(RunArgs),
    /// Estimate cumulative regret and fit sqrt(R) against ln(M_L).
    Regret(RunArgs),
    /// Heavy-traffic sweep over the configured market sizes.
    Sweep(RunArgs),
    /// Oracle cross-checks; one line per check.
    Validate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output.dir` (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub struct Run {
    pub experiment: Experiment,
    pub out: PathBuf,
}

impl RunArgs {
    fn load(&self) -> queue_pricing::Result<Run> {
        let mut experiment = ExperimentConfig::from_path(&self.config)?.build()?;
        if let Some(seed) = self.seed {
            experiment.seed = seed;
        }
        let out = self
            .out
            .clone()
            .or_else(|| experiment.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok(Run { experiment, out })
    }
}

/// Failures the CLI reports, mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Model(Error),
    Io(String),
    ChecksFailed(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Optimize(a) => commands::optimize(&a.load()?),
        Command::Regret(a) => commands::regret(&a.load()?),
        Command::Sweep(a) => commands::sweep(&a.load()?),
        Command::Validate { seed } => validate::run(seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Model(e)) if e.is_config_error() => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Model(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::ChecksFailed(n)) => {
            eprintln!("{n} check(s) failed");
            ExitCode::from(1)
        }
    }
}
