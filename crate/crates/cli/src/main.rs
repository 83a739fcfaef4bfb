//! `cooccur`: batch front end for ingesting camera-trap records, fitting the
//! multispecies occupancy model and running classifier-error experiments.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cooccur::estimation::DEFAULT_SEED;
use cooccur::survey::LabelSource;

#[derive(Parser, Debug)]
#[command(name = "cooccur", version, about = "Multispecies occupancy from camera-trap images")]
struct Cli {
    /// Directory for output files (created if needed).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Worker threads. Results do not depend on this value.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    threads: u16,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a monthly detection history from image records.
    Ingest(IngestArgs),
    /// Confusion matrix and per-class precision / recall of predicted labels.
    Metrics(MetricsArgs),
    /// Maximum-likelihood fit with intervals for derived quantities.
    Fit(FitArgs),
    /// Recompute derived-quantity intervals from a saved fit.
    Derive(DeriveArgs),
    /// Simulate a detection history (and optionally image records).
    Simulate(SimulateArgs),
    /// Fill predicted labels by sampling from a confusion matrix.
    Corrupt(CorruptArgs),
    /// Compare fits on ground-truth and classifier labels.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum LabelSourceArg {
    True,
    Predicted,
}

impl From<LabelSourceArg> for LabelSource {
    fn from(v: LabelSourceArg) -> Self {
        match v {
            LabelSourceArg::True => LabelSource::True,
            LabelSourceArg::Predicted => LabelSource::Predicted,
        }
    }
}

/// Image records plus how to aggregate them.
#[derive(Args, Debug, Serialize)]
struct RecordsArgs {
    /// images.csv with site_id,timestamp,label_true,label_pred.
    #[arg(long)]
    images: PathBuf,
    /// deployments.csv with site_id,start,end.
    #[arg(long)]
    deployments: Option<PathBuf>,
    /// Modelled species, comma separated, in model order.
    #[arg(long)]
    species: String,
    #[arg(long, value_enum, default_value = "true")]
    label_source: LabelSourceArg,
}

#[derive(Args, Debug, Serialize)]
struct IngestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    records: RecordsArgs,
}

#[derive(Args, Debug, Serialize)]
struct MetricsArgs {
    #[arg(long)]
    images: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct FitSettings {
    /// Random starts in addition to the start at zero.
    #[arg(long, default_value_t = 5)]
    starts: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    grad_tol: f64,
    /// Confidence level of the intervals.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

#[derive(Args, Debug, Serialize)]
#[group(required = true, multiple = false)]
struct FitInput {
    /// history.json written by `ingest` or `simulate`.
    #[arg(long)]
    history: Option<PathBuf>,
    /// images.csv to aggregate first (needs --species).
    #[arg(long, requires = "species")]
    images: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: FitInput,
    #[arg(long)]
    deployments: Option<PathBuf>,
    #[arg(long)]
    species: Option<String>,
    #[arg(long, value_enum, default_value = "true")]
    label_source: LabelSourceArg,
    /// Species whose conditional occupancies are reported (default: the first).
    #[arg(long)]
    target: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    settings: FitSettings,
}

#[derive(Args, Debug, Serialize)]
struct DeriveArgs {
    /// fit-result.json written by `fit`.
    #[arg(long)]
    fit: PathBuf,
    #[arg(long)]
    target: Option<String>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SimFormat {
    History,
    Images,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    /// Occupancy state probabilities (2^S values, species 0 is the lowest bit).
    /// Defaults to the built-in lynx / roe deer / chamois scenario.
    #[arg(long, requires = "p")]
    psi: Option<String>,
    /// Detection probabilities, one per species.
    #[arg(long, requires = "psi")]
    p: Option<String>,
    /// Species names (default: scenario names, or sp0, sp1, ...).
    #[arg(long)]
    species: Option<String>,
    #[arg(long, default_value_t = cooccur::simulation::scenario::SITES)]
    sites: usize,
    #[arg(long, default_value_t = cooccur::simulation::scenario::OCCASIONS)]
    occasions: usize,
    #[arg(long, default_value_t = 0.0)]
    missing_rate: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// `images` also writes images.csv and deployments.csv.
    #[arg(long, value_enum, default_value = "history")]
    format: SimFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Preset {
    /// Every label kept.
    Identity,
    /// The built-in poorly transferring classifier.
    Transfer,
}

#[derive(Args, Debug, Serialize)]
#[group(multiple = false)]
struct ConfusionSource {
    /// confusion.csv (rows true, columns predicted) to sample from.
    #[arg(long)]
    confusion: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
}

#[derive(Args, Debug, Serialize)]
struct CorruptArgs {
    #[arg(long)]
    images: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    source: ConfusionSource,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct ExperimentArgs {
    /// Image records; without them the built-in scenario is simulated.
    #[arg(long, requires = "species")]
    images: Option<PathBuf>,
    #[arg(long)]
    deployments: Option<PathBuf>,
    #[arg(long)]
    species: Option<String>,
    /// Sites whose images are classified, comma separated (default: all, or
    /// the scenario's transfer sites when simulating).
    #[arg(long)]
    classified_sites: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    source: ConfusionSource,
    /// Sites and occasions of the simulated scenario.
    #[arg(long, default_value_t = cooccur::simulation::scenario::SITES)]
    sites: usize,
    #[arg(long, default_value_t = cooccur::simulation::scenario::OCCASIONS)]
    occasions: usize,
    /// Largest acceptable marginal-occupancy difference (a convention, not an estimate).
    #[arg(long, default_value_t = 0.1)]
    threshold: f64,
    #[arg(long)]
    target: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    settings: FitSettings,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .any(|e| e.downcast_ref::<cooccur::Error>().is_some_and(|e| e.is_numerical()));
    if numerical {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let result = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads as usize)
        .build()
        .map_err(anyhow::Error::from)
        .and_then(|pool| pool.install(|| commands::run(&cli.command, &cli.out)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
