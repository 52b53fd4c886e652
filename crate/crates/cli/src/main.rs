use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use goosc::commands;
use goosc::harness::{self, ExperimentConfig, ExperimentName, ExperimentOutcome};
use goosc::Error;

/// Simulate oscillatory systems, calibrate healthy baselines, compute
/// geometric indicators, and run the detection experiments.
///
/// Exit status: 0 success, 1 an experiment assertion failed, 2 usage or
/// configuration error, 3 numerical failure.
#[derive(Debug, Parser)]
#[command(name = "goosc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// TOML configuration; defaults are used for absent keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the configured degradation scenario.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Layer the amplitude-shock nuisance on top.
        #[arg(long)]
        nuisance: bool,
    },
    /// Calibrate the healthy baseline.
    Calibrate {
        #[command(flatten)]
        common: Common,
    },
    /// Compute the indicator series of a signal.
    Indicators {
        #[command(flatten)]
        common: Common,
        /// Signal CSV with columns t, x_1 .. x_p; simulated when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Baseline JSON written by `calibrate`; calibrated when absent.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Fit and evaluate a linear detection probe.
    Detect {
        #[command(flatten)]
        common: Common,
        /// Layer the amplitude-shock nuisance on top.
        #[arg(long)]
        nuisance: bool,
    },
    /// Run one experiment: motivation, geometry, ablation, efficiency or stress.
    Experiment {
        name: String,
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common, command: &str) -> Result<(ExperimentConfig, PathBuf), Error> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| Path::new("results").join(command));
    Ok((cfg, out))
}

fn run(command: Command) -> Result<ExperimentOutcome, Error> {
    match command {
        Command::Simulate { common, nuisance } => {
            let (cfg, out) = load(&common, "simulate")?;
            commands::run_simulate(&cfg, nuisance, &out)
        }
        Command::Calibrate { common } => {
            let (cfg, out) = load(&common, "calibrate")?;
            commands::run_calibrate(&cfg, &out)
        }
        Command::Indicators { common, input, baseline } => {
            let (cfg, out) = load(&common, "indicators")?;
            commands::run_indicators(&cfg, input.as_deref(), baseline.as_deref(), &out)
        }
        Command::Detect { common, nuisance } => {
            let (cfg, out) = load(&common, "detect")?;
            commands::run_detect(&cfg, nuisance, &out)
        }
        Command::Experiment { name, common } => {
            let name: ExperimentName = name.parse()?;
            let (mut cfg, out) = load(&common, name.as_str())?;
            cfg.experiment = Some(name);
            harness::run_experiment(name, &cfg, &out)
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Io(_) | Error::Json(_) | Error::InvalidParameter(_) | Error::DimensionMismatch(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(outcome) => {
            for (k, v) in &outcome.report.metrics {
                println!("{k} = {v}");
            }
            for a in &outcome.report.assertions {
                let tag = if a.passed { "PASS" } else { "FAIL" };
                println!("{tag} {}: {} ({})", a.name, a.measured, a.requirement);
            }
            println!("wrote {} files to {}", outcome.outputs.len(), outcome.output_dir.display());
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("goosc: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
