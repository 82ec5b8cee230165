//! `biofuse`: EEG/EMG movement-stage recognition pipeline.

mod commands;
mod config;
mod conversion;
mod error;
mod io;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::PipelineConfig;

#[derive(Debug, Parser)]
#[command(name = "biofuse", version, about = "EEG/EMG movement-stage recognition with decision-level fusion")]
struct Cli {
    /// Pipeline configuration (TOML); built-in defaults when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed; overrides BIOFUSE_SEED and the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth(commands::SynthArgs),
    /// Extract windowed features for one modality.
    Extract(commands::ExtractArgs),
    /// Run Boruta feature selection on a feature matrix.
    Select(commands::SelectArgs),
    /// Fit a classifier on a whole feature matrix.
    Train(commands::TrainArgs),
    /// Cross-validate a classifier, or score a trained model on new features.
    Evaluate(commands::EvaluateArgs),
    /// Run the noise scenarios for decision-level fusion.
    FuseEval(commands::FuseEvalArgs),
    /// Compute the ERD/ERS band-power curve of one EEG channel.
    Erders(commands::ErdersArgs),
    /// Summarise evaluation results into one table.
    Report(commands::ReportArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = PipelineConfig::load(cli.config.as_deref(), cli.seed).and_then(|cfg| {
        let ctx = commands::Context { cfg, config_path: cli.config.clone() };
        match cli.command {
            Command::Synth(a) => commands::synth(&ctx, a),
            Command::Extract(a) => commands::extract(&ctx, a),
            Command::Select(a) => commands::select(&ctx, a),
            Command::Train(a) => commands::train(&ctx, a),
            Command::Evaluate(a) => commands::evaluate(&ctx, a),
            Command::FuseEval(a) => commands::fuse_eval(&ctx, a),
            Command::Erders(a) => commands::erders(&ctx, a),
            Command::Report(a) => commands::report(&ctx, a),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
