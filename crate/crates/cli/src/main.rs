//! Command-line driver for tomography sweeps.
//!
//! Exit status: 0 on success, 2 for configuration problems, 3 when a sweep
//! fails while running.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qst_lre::config::{parse_config, parse_config_str, ExperimentKind, Overrides, SweepSpec};
use qst_lre::output::emit_results;
use qst_lre::sim::run_sweep;
use qst_lre::Error;

#[derive(Parser)]
#[command(name = "qst-lre", version, about = "Robust linear-regression state tomography sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Static tomography, sweeping shots per configuration.
    StaticSweep(RunArgs),
    /// Static tomography, sweeping the number of qubits.
    QubitSweep(RunArgs),
    /// Dynamic tomography, sweeping the copies per time sample.
    DynamicSweep(RunArgs),
    /// Nominal and robust bounds without running trials.
    Bounds(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config or a manifest from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per sweep point.
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn load(kind: ExperimentKind, args: &RunArgs) -> Result<SweepSpec, Error> {
    let overrides = Overrides {
        experiment: Some(kind),
        seed: args.seed,
        trials: args.trials,
        output: args.out.clone(),
    };
    match &args.config {
        Some(path) => parse_config(path, &overrides),
        None => parse_config_str("{}", &overrides),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::StaticSweep(a) => (ExperimentKind::StaticNSweep, a),
        Command::QubitSweep(a) => (ExperimentKind::StaticQubitSweep, a),
        Command::DynamicSweep(a) => (ExperimentKind::DynamicNSweep, a),
        Command::Bounds(a) => (ExperimentKind::BoundsOnly, a),
    };
    let spec = match load(kind, args) {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    for w in &spec.warnings {
        eprintln!("warning: {w}");
    }
    let result = match run_sweep(&spec) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    match emit_results(&result, &spec, spec.output.as_ref()) {
        Ok((csv, manifest)) => {
            println!("{}", csv.display());
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
