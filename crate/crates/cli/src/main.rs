//! `hyve`: generate synthetic multi-camera data, train and evaluate
//! wavelength-aware networks, export learned filters and run ablations.

mod eval;
mod export;
mod gen_data;
mod manifest;
mod outputs;
mod svg;
mod sweep;
mod train;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hyve::HyveError;

#[derive(Parser, Debug)]
#[command(
    name = "hyve",
    version,
    about = "Wavelength-aware convolutions for hyperspectral cubes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Writes synthetic train/test cubes per camera and a manifest.
    GenData(gen_data::GenDataArgs),
    /// Trains one network on the training cubes of a manifest.
    Train(train::TrainArgs),
    /// Prints OA/AA/kappa of a checkpoint per camera.
    Eval(eval::EvalArgs),
    /// Writes the learned WROI filters, their overlaps and trajectory charts.
    ExportFilters(export::ExportArgs),
    /// Runs a seeded ablation or comparison and writes a summary CSV.
    Sweep(sweep::SweepArgs),
}

#[derive(Debug)]
pub enum CliError {
    /// Invalid flags or flag combinations; exit code 2.
    Usage(String),
    /// Failures while running; exit code 1.
    Failed(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl From<HyveError> for CliError {
    fn from(e: HyveError) -> Self {
        match e {
            HyveError::Config(m) => CliError::Usage(m),
            other => CliError::Failed(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenData(a) => gen_data::run(a),
        Command::Train(a) => train::run(a),
        Command::Eval(a) => eval::run(a),
        Command::ExportFilters(a) => export::run(a),
        Command::Sweep(a) => sweep::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hyve: {e}");
            ExitCode::from(match e {
                CliError::Usage(_) => 2,
                CliError::Failed(_) => 1,
            })
        }
    }
}
