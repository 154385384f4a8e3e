use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fracdose_cli::commands::{self, Overrides};
use fracdose_cli::policy::PolicySpec;
use fracdose_cli::report;

#[derive(Parser)]
#[command(name = "fracdose", version, about = "Adaptive dosing experiments on a fractional-order resistance model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (JSON, comments allowed), or a manifest to repeat.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the agent seed.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
    /// Artifact directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Memory order; repeat for several.
    #[arg(long, value_name = "FLOAT")]
    mu: Vec<f64>,
    /// Hours per action, keeping the simulated duration; repeat for several.
    #[arg(long, value_name = "FLOAT")]
    delta: Vec<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            config: self.config.clone(),
            seed: self.seed,
            mu: self.mu.clone(),
            delta: self.delta.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Roll out policies and write one trajectory CSV per policy and memory order.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// constant:0|1, pulsing:LOW,HIGH, memoryless:LOW,HIGH or greedy:CHECKPOINT.
        #[arg(long = "policy", value_name = "SPEC", required = true)]
        policies: Vec<PolicySpec>,
    },
    /// Evaluate every threshold pair of the configured grid.
    SweepThresholds {
        #[command(flatten)]
        common: Common,
    },
    /// Train a Double DQN agent.
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from a checkpoint instead of starting fresh.
        #[arg(long, value_name = "PATH")]
        resume: Option<PathBuf>,
    },
    /// Build comparison tables from earlier artifact directories.
    Report {
        /// Directories written by the other commands.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Train several agents per step size and keep the best of each.
    DeltaSweep {
        #[command(flatten)]
        common: Common,
        /// Agents per step size.
        #[arg(long, value_name = "INT")]
        runs: Option<usize>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate { common, policies } => commands::simulate(&common.overrides(), &policies, &common.out),
        Command::SweepThresholds { common } => commands::sweep(&common.overrides(), &common.out),
        Command::Train { common, resume } => commands::train(&common.overrides(), resume.as_deref(), &common.out),
        Command::Report { runs, out } => report::report(&runs, &out),
        Command::DeltaSweep { common, runs } => commands::delta_sweep(&common.overrides(), runs, &common.out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fracdose: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
