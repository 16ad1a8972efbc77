//! `xaits`: synthesize data, build lagged datasets, sweep SVR models over
//! lags, explain single forecasts with LIME and SHAP, and compute the
//! evaluation statistics.

mod commands;
mod config;
mod error;
mod render;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use xaits_core::evalstats::{Demographic, Group};

use crate::commands::{EvalArgs, EvalTest, ExplainPaths, Output, TrainPaths};
use crate::config::{Explainer, FileConfig, Format, Overrides, RunConfig};
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "xaits", version, about = "Explainable SVR forecasting for monthly series")]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output format of the primary result.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write the primary result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML file with defaults; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic monthly frame and its ground-truth sidecar.
    Synth(SynthArgs),
    /// Scale a frame and reframe it into a lagged dataset.
    Prepare(PrepareArgs),
    /// Grid-search SVR models for each lag and report test MAPE.
    Train(TrainArgs),
    /// Explain the forecast for one test-set month.
    Explain(ExplainArgs),
    /// Statistics over human-evaluation responses.
    Eval(EvalCliArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    months: Option<usize>,
    /// Number of activity features.
    #[arg(long)]
    features: Option<usize>,
    /// Ground-truth JSON path (default: next to --out).
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PrepareArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    lag: usize,
    /// Keep raw values instead of min-max scaling.
    #[arg(long)]
    no_scale: bool,
    /// Scaler JSON path (default: next to --out).
    #[arg(long)]
    scaler: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    target: Option<String>,
    /// Comma-separated lags.
    #[arg(long, value_delimiter = ',')]
    lags: Option<Vec<usize>>,
    /// JSON grid with keys kernels, C, gammas, epsilons.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    n_splits: Option<usize>,
    #[arg(long)]
    no_scale: bool,
    /// Where to write the best model.
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Where to write the best lag's dataset, scaled like the model's inputs.
    #[arg(long)]
    dataset_out: Option<PathBuf>,
    #[arg(long)]
    scaler_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Month to explain, YYYY-MM; must lie in the test split.
    #[arg(long)]
    period: String,
    #[arg(long, value_enum)]
    explainer: Option<Explainer>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    lime_samples: Option<usize>,
    #[arg(long)]
    shap_iterations: Option<usize>,
    /// Report values in original units (needs --scaler).
    #[arg(long)]
    denormalize: bool,
    #[arg(long)]
    scaler: Option<PathBuf>,
    /// Also write the chart here.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalCliArgs {
    /// Response CSV: participant_id, group, yes_count and optional demographics.
    #[arg(long)]
    responses: Option<PathBuf>,
    /// Summary statistics JSON for a Welch test.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long, value_enum)]
    test: Option<EvalTest>,
    /// Comma-separated groups (LIME, SHAP, noXAI).
    #[arg(long, value_delimiter = ',')]
    groups: Option<Vec<Group>>,
    #[arg(long, default_value = "xai_knowledge")]
    demographic: Demographic,
    /// Cases shown to each participant.
    #[arg(long)]
    n_cases: Option<u32>,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut flags = Overrides {
        seed: cli.seed,
        format: cli.format,
        ..Overrides::default()
    };
    match &cli.command {
        Command::Synth(a) => {
            flags.months = a.months;
            flags.features = a.features;
        }
        Command::Prepare(a) => flags.target = a.target.clone(),
        Command::Train(a) => {
            flags.target = a.target.clone();
            flags.lags = a.lags.clone();
            flags.grid = a.grid.clone();
            flags.train_fraction = a.train_fraction;
            flags.n_splits = a.n_splits;
        }
        Command::Explain(a) => {
            flags.explainer = a.explainer;
            flags.top_k = a.top_k;
            flags.train_fraction = a.train_fraction;
            flags.lime_samples = a.lime_samples;
            flags.shap_iterations = a.shap_iterations;
        }
        Command::Eval(a) => flags.n_cases = a.n_cases,
    }
    let cfg = RunConfig::resolve(flags, file)?;
    let out = cli.out.as_deref();

    let output: Output = match &cli.command {
        Command::Synth(a) => commands::synth_cmd(&cfg, out, a.truth.as_deref())?,
        Command::Prepare(a) => commands::prepare_cmd(&cfg, &a.input, a.lag, !a.no_scale, out, a.scaler.as_deref())?,
        Command::Train(a) => commands::train_cmd(
            &cfg,
            TrainPaths {
                input: &a.input,
                model_out: a.model_out.as_deref(),
                dataset_out: a.dataset_out.as_deref(),
                scaler_out: a.scaler_out.as_deref(),
            },
            !a.no_scale,
        )?,
        Command::Explain(a) => commands::explain_cmd(
            &cfg,
            ExplainPaths {
                model: &a.model,
                dataset: &a.dataset,
                scaler: a.scaler.as_deref(),
                svg: a.svg.as_deref(),
            },
            &a.period,
            a.denormalize,
        )?,
        Command::Eval(a) => commands::eval_cmd(
            &cfg,
            EvalArgs {
                responses: a.responses.as_deref(),
                summary: a.summary.as_deref(),
                test: a.test,
                groups: a.groups.as_deref(),
                demographic: a.demographic,
            },
        )?,
    };

    for artifact in &output.artifacts {
        write_file(&artifact.path, &artifact.contents)?;
    }
    match out {
        Some(path) => write_file(path, &output.primary),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(output.primary.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
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
