//! `variety`: experiments on the Minimum-over-N (variety) loss.
//!
//! Every subcommand writes `manifest.json` into `--out-dir` before any
//! result, then its CSV outputs (and SVG plots with `--svg`). Results depend
//! only on the flags and `--seed`, never on `--threads`.
//!
//! Exit codes: 0 success, 1 numeric or validation failure, 2 usage error.

mod commands;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "variety", version, about = "Minimum-over-N loss experiments")]
struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = one per core). Does not affect results.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Directory for the manifest and all outputs.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Also emit SVG plots.
    #[arg(long, global = true)]
    svg: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan the power family base^k for the exponent minimizing the MoN loss.
    MonScan(commands::MonScanArgs),
    /// Repeat the exponent scan for several N and dimensions.
    KVsN(commands::KVsNArgs),
    /// Sample the squared density using only samples of the base density.
    SquareSample(commands::SquareSampleArgs),
    /// Train the particle model on the two-condition toy problem.
    LearnToy(commands::LearnToyArgs),
    /// Search the compensation exponent for a scene file.
    Compensate(commands::CompensateArgs),
    /// MoN metric and marginalized log-likelihood for a scene file.
    Eval(commands::EvalArgs),
    /// Write synthetic scenes with known dilation.
    Synth(commands::SynthArgs),
}

fn main() -> ExitCode {
    // Usage errors exit with status 2 inside `parse`.
    let cli = Cli::parse();
    let global = commands::Global { seed: cli.seed, out_dir: cli.out_dir, svg: cli.svg };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::MonScan(a) => commands::mon_scan(&global, a),
        Command::KVsN(a) => commands::k_vs_n(&global, a),
        Command::SquareSample(a) => commands::square_sample(&global, a),
        Command::LearnToy(a) => commands::learn_toy(&global, a),
        Command::Compensate(a) => commands::compensate(&global, a),
        Command::Eval(a) => commands::eval(&global, a),
        Command::Synth(a) => commands::synth(&global, a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
