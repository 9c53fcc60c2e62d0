//! `lncsim`: run coded-broadcast experiments and write CSV reports.

mod commands;
mod config;
mod format;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, Objective};
use config::{Erasure, ExperimentConfig, GenParams};

#[derive(Parser)]
#[command(name = "lncsim", version, about = "Linear network coded broadcast simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo estimates of completion time and decoding delay.
    Simulate(ExperimentArgs),
    /// Estimates divided by their lower bounds, per receiver and aggregate.
    RatioReport(ExperimentArgs),
    /// Exhaustive erasure-free optimum for a small instance.
    Oracle {
        #[arg(long)]
        sfm: String,
        #[arg(long, value_enum, default_value = "completion")]
        objective: Objective,
        /// Maximum schedule length searched (default K + 2).
        #[arg(long)]
        horizon: Option<usize>,
        /// Search field order. Without it, completion searches GF(2) and
        /// falls back to GF(4) if GF(2) cannot reach max w_n.
        #[arg(long)]
        field: Option<u32>,
    },
    /// Write a generated state feedback matrix.
    GenSfm {
        /// theorem2, a1, a2, theorem5 or random.
        generator: String,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        w1: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file (default stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// SFM file path, or gen:<name>[:key=value,...] such as gen:a1:k=4.
    #[arg(long)]
    sfm: Option<String>,
    /// rlnc, mds, uncoded, halving, idnc-greedy or partitioned:<plan>:<inner>.
    #[arg(long)]
    scheme: Option<String>,
    /// Erasure probability for every receiver, or a comma-separated list.
    #[arg(long)]
    pe: Option<Erasure>,
    #[arg(long)]
    field: Option<u32>,
    /// full or memoryless.
    #[arg(long)]
    memory: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_slots: Option<usize>,
    /// Output directory (default current directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn into_config(self) -> Result<ExperimentConfig, CliError> {
        let base = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        Ok(base.overlay(ExperimentConfig {
            sfm: self.sfm,
            scheme: self.scheme,
            pe: self.pe,
            field: self.field,
            memory: self.memory,
            trials: self.trials,
            seed: self.seed,
            max_slots: self.max_slots,
            out: self.out,
        }))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => commands::simulate(&args.into_config()?),
        Command::RatioReport(args) => commands::ratio_report(&args.into_config()?),
        Command::Oracle { sfm, objective, horizon, field } => commands::oracle(&sfm, objective, horizon, field),
        Command::GenSfm { generator, k, m, w1, n, p, seed, out } => {
            let params = GenParams { k, m, w1, n, p, seed };
            commands::gen_sfm(&generator, &params, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
