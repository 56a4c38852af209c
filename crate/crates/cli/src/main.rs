//! `gridcast` — config-driven CLI over the forecasting pipeline.
//!
//! Exit codes: 0 on success, 1 for validation problems (bad flags, bad
//! config, malformed input files), 2 for runtime failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gridcast::experiment::{
    run_ablate, run_calibrate, run_evaluate, run_generate, run_predict, run_report, run_train,
    CalibrationMethod, ExperimentConfig, RunDir,
};

#[derive(Parser)]
#[command(name = "gridcast", version, about = "Probabilistic electricity load forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand that builds a fresh experiment config.
/// Subcommands that replay a run directory use its `config.json` snapshot
/// instead.
#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// TOML experiment file (mutually exclusive with --profile).
    #[arg(long, conflicts_with = "profile")]
    config: Option<PathBuf>,
    /// Built-in scale profile.
    #[arg(long, value_parser = ["desk", "paper"], default_value = "desk")]
    profile: String,
    /// Override every RNG seed at once (data, training, inference).
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> gridcast::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_toml_file(path)?,
            None => ExperimentConfig::by_profile(&self.profile)?,
        };
        if let Some(seed) = self.seed {
            cfg.set_seed(seed);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum MethodArg {
    None,
    Isotonic,
    Conformal,
}

impl From<MethodArg> for CalibrationMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::None => CalibrationMethod::None,
            MethodArg::Isotonic => CalibrationMethod::Isotonic,
            MethodArg::Conformal => CalibrationMethod::Conformal,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic hourly series: CSV plus an event-label sidecar.
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output CSV path (the sidecar lands next to it).
        #[arg(long, default_value = "load.csv")]
        out: PathBuf,
        /// Override the number of hours to synthesize.
        #[arg(long)]
        hours: Option<usize>,
        /// Override the number of injected heatwave/cold-snap pairs.
        #[arg(long)]
        events: Option<usize>,
    },
    /// Train a model; writes config.json, history.csv, best.ckpt, final.ckpt.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Run directory to create.
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Forecast the test windows with the best checkpoint.
    Predict {
        /// Run directory produced by `train`.
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Fit calibration on the cal_fit split and verify it on cal_eval.
    Calibrate {
        /// Run directory produced by `train`.
        #[arg(long, default_value = "run")]
        out: PathBuf,
        /// Calibration method (defaults to the run's config snapshot).
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Score the test split: metrics, reliability curve, interval plot.
    Evaluate {
        /// Run directory produced by `train`.
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Train and score the six-rung mechanism-ablation ladder.
    Ablate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output CSV path.
        #[arg(long, default_value = "ablation.csv")]
        out: PathBuf,
    },
    /// Render report.md from the artifacts already in a run directory.
    Report {
        /// Run directory produced by `train`.
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> gridcast::Result<()> {
    match cli.command {
        Command::Generate { config, out, hours, events } => {
            let cfg = config.resolve()?;
            let mut synth = cfg.data.synth.clone();
            if let Some(h) = hours {
                synth.hours = h;
            }
            if let Some(e) = events {
                synth.event_count = e;
            }
            let outcome = run_generate(&synth, &out)?;
            println!(
                "wrote {} hours to {} ({} labeled events)",
                outcome.n_hours,
                outcome.csv.display(),
                outcome.n_events
            );
        }
        Command::Train { config, out } => {
            let cfg = config.resolve()?;
            let trained = run_train(&cfg, &out)?;
            let best = trained.outcome.history.best();
            println!(
                "trained {} epochs; best val CRPS {:.6} at epoch {}; artifacts in {}",
                trained.outcome.history.records.len(),
                best.val_crps,
                best.epoch,
                out.display()
            );
        }
        Command::Predict { out } => {
            let run = RunDir::open(&out)?;
            let path = run_predict(&run)?;
            println!("wrote {}", path.display());
        }
        Command::Calibrate { out, method } => {
            let run = RunDir::open(&out)?;
            let method = match method {
                Some(m) => CalibrationMethod::from(m),
                None => run.load_config()?.calibration,
            };
            let outcome = run_calibrate(&run, method)?;
            println!(
                "calibrated ({:?}): mean |coverage − nominal| {:.4} -> {:.4} on cal_eval",
                outcome.method, outcome.before_mean_dev, outcome.after_mean_dev
            );
        }
        Command::Evaluate { out } => {
            let run = RunDir::open(&out)?;
            let report = run_evaluate(&run)?;
            println!(
                "test: MAE {:.2} MW, CRPS {:.4} (std), PICP80 {:.3}, PICP90 {:.3}; artifacts in {}",
                report.all.mae_mw,
                report.all.crps_std,
                report.all.picp_80,
                report.all.picp_90,
                out.display()
            );
        }
        Command::Ablate { config, out } => {
            let cfg = config.resolve()?;
            let rows = run_ablate(&cfg, &out)?;
            for row in &rows {
                println!("rung {} ({}): CRPS {:.4}", row.rung, row.label, row.crps_std);
            }
            println!("wrote {}", out.display());
        }
        Command::Report { out } => {
            let run = RunDir::open(&out)?;
            let path = run_report(&run)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help/--version arrive here too and are not failures.
            let is_help = matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = err.print();
            return if is_help { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_validation() { 1 } else { 2 })
        }
    }
}
