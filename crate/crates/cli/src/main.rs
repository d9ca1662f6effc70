use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use spectral_lab::{plot, run_experiment, ExperimentConfig};

/// Boundary-value diagnostics for rigged self-adjoint operators.
#[derive(Parser)]
#[command(name = "spectral-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify every point of the config's lambda grid and write a report.
    Run {
        config: PathBuf,
        /// Report directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; all cores by default.
        #[arg(long)]
        jobs: Option<usize>,
        /// Seed for random witnesses (overrides `witnesses.seed`).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Redraw the SVG plots of an existing report directory.
    Plot { dir: PathBuf },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match ExperimentConfig::from_file(&config) {
            Ok(cfg) => {
                println!(
                    "ok: model {} (K = {}), {} lambda points",
                    cfg.model.id(),
                    cfg.model.rigging_dim(),
                    cfg.lambda_grid.len()
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Command::Run {
            config,
            out,
            jobs,
            seed,
        } => {
            let mut cfg = match ExperimentConfig::from_file(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            match run(&cfg, jobs) {
                Ok(code) => code,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Plot { dir } => match plot::emit_plots(&dir) {
            Ok(notes) => {
                for n in notes {
                    eprintln!("note: {n}");
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
    }
}

fn run(cfg: &ExperimentConfig, jobs: Option<usize>) -> anyhow::Result<ExitCode> {
    if jobs == Some(0) {
        anyhow::bail!("--jobs must be at least 1");
    }
    let report = run_experiment(cfg, jobs)
        .with_context(|| format!("writing report to {}", cfg.output_dir.display()))?;
    for v in &report.verdicts {
        println!("lambda = {:<12} {}", v.lambda, v.status.label());
    }
    for n in &report.plot_notes {
        eprintln!("note: {n}");
    }
    println!("report: {}", report.output_dir.display());
    Ok(if report.any_inconclusive() {
        ExitCode::from(EXIT_INCONCLUSIVE)
    } else {
        ExitCode::SUCCESS
    })
}
