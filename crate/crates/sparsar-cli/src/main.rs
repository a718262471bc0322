use clap::{Parser, Subcommand};
use sparsar_cli::config::{ExperimentConfig, PatternKind, ReconKind};
use sparsar_cli::error::CliError;
use sparsar_cli::experiment::{run_experiment, RunOptions};
use sparsar_cli::train::run_training;
use std::path::PathBuf;
use std::process::ExitCode;

/// Sparse stripmap SAR simulation, reconstruction, and sampling-pattern
/// learning experiments.
#[derive(Parser)]
#[command(name = "sparsar", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config file (key = value sections); defaults are used when
    /// omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Sampling pattern override: uniform|poisson|staggered|learned:PATH.
    #[arg(long, global = true)]
    pattern: Option<String>,

    /// Azimuth budget fraction override, in (0, 1].
    #[arg(long, global = true)]
    budget: Option<f64>,

    /// Reconstruction override: mf|ista|modl.
    #[arg(long, global = true)]
    recon: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scenes, echoes, and pattern artifacts without reconstructing.
    Simulate,
    /// Reconstruct the configured scenes and write per-stage images.
    Reconstruct,
    /// Jointly train the sampling pattern and denoiser weights.
    Train,
    /// Score reconstructions against ground truth and write the report files.
    Evaluate,
    /// Full pipeline: simulate, reconstruct, evaluate, and print the table.
    Report,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if let Some(pattern) = &cli.pattern {
        config.pattern.kind = PatternKind::parse(pattern)
            .map_err(|message| CliError::Config { line: None, message })?;
    }
    if let Some(budget) = cli.budget {
        config.pattern.budget = budget;
    }
    if let Some(recon) = &cli.recon {
        config.recon.kind =
            ReconKind::parse(recon).map_err(|message| CliError::Config { line: None, message })?;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = load_config(&cli)?;
    match cli.command {
        Command::Simulate => {
            let options =
                RunOptions { write_images: true, write_report: false, reconstruct: false };
            run_experiment(config, options)?;
            println!("simulation artifacts written");
        }
        Command::Reconstruct => {
            let options = RunOptions { write_images: true, write_report: false, reconstruct: true };
            let report = run_experiment(config, options)?;
            report.print_table();
        }
        Command::Train => {
            run_training(config)?;
        }
        Command::Evaluate => {
            let report = run_experiment(config, RunOptions::default())?;
            println!(
                "mean ssim {:.4}, mean reconstruction psnr {:.2} dB over {} scenes",
                report.mean_ssim(),
                report.mean_reconstruction_psnr(),
                report.rows.len()
            );
        }
        Command::Report => {
            let report = run_experiment(config, RunOptions::default())?;
            report.print_table();
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
