use std::path::PathBuf;
use std::process::ExitCode;

use atmc_cli::commands;
use atmc_cli::{CliError, ExperimentConfig};
use atmc_core::posterior::Binning;
use atmc_core::StepSizeSchedule;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "atmc", version, about = "Adaptive-thermostat Monte Carlo experiments")]
struct Cli {
    /// Experiment config file (flat `section.key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory.
    #[arg(long, global = true)]
    outdir: Option<PathBuf>,
    /// Overwrite an existing run.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a chain and persist its records and snapshots.
    Sample,
    /// Score the snapshots of a run on a test set.
    Evaluate {
        /// Test set overriding `eval.dataset`.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Calibration bins of a predictions file (probabilities then label per row).
    Calibrate {
        predictions: PathBuf,
        #[arg(long)]
        equal_width: bool,
    },
    /// Mass, speed limit and momentum noise for a base step size.
    DeriveHypers {
        #[arg(long)]
        h0: f64,
    },
    /// Step sizes for a range of step indices.
    ScheduleDump {
        #[arg(long)]
        h0: Option<f64>,
        /// Cycle length; constant schedule when omitted.
        #[arg(long)]
        cycle: Option<u64>,
        #[arg(long, default_value_t = 0)]
        start: u64,
        #[arg(long, default_value_t = 100)]
        end: u64,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli.config.as_deref().ok_or_else(|| CliError::Config("--config: required".into()))?;
    let config = ExperimentConfig::load(path)?;
    Ok(match cli.seed {
        Some(s) => config.with_seed(s),
        None => config,
    })
}

fn outdir(cli: &Cli, config: Option<&ExperimentConfig>) -> Result<PathBuf, CliError> {
    cli.outdir
        .clone()
        .or_else(|| config.and_then(|c| c.output_dir.clone()))
        .ok_or_else(|| CliError::Config("--outdir: required (or set output.dir)".into()))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut stdout = std::io::stdout().lock();
    match &cli.command {
        Command::Sample => {
            let config = load_config(cli)?;
            let dir = outdir(cli, Some(&config))?;
            commands::sample(&config, &dir, cli.force, &mut stdout)?;
        }
        Command::Evaluate { dataset } => {
            let config = cli.config.is_some().then(|| load_config(cli)).transpose()?;
            let dir = outdir(cli, config.as_ref())?;
            commands::evaluate(&dir, config, dataset.clone(), &mut stdout)?;
        }
        Command::Calibrate { predictions, equal_width } => {
            let binning = if *equal_width { Binning::EqualWidth } else { Binning::EqualCount };
            commands::calibrate(predictions, binning, cli.outdir.as_deref(), &mut stdout)?;
        }
        Command::DeriveHypers { h0 } => {
            commands::derive_hypers_cmd(*h0, &mut stdout)?;
        }
        Command::ScheduleDump { h0, cycle, start, end } => {
            let schedule = match (h0, &cli.config) {
                (Some(h0), _) => match cycle {
                    Some(n) => StepSizeSchedule::Cyclic { h0: *h0, cycle: *n },
                    None => StepSizeSchedule::Constant { h0: *h0 },
                },
                (None, Some(_)) => load_config(cli)?.sampler.schedule,
                (None, None) => return Err(CliError::Config("--h0: required (or pass --config)".into())),
            };
            commands::schedule_dump(&schedule, *start, *end, &mut stdout)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("atmc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

