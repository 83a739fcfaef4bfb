use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use log::warn;
use serde::Serialize;

use cooccur::estimation::{fit, FitOptions};
use cooccur::metrics::{confusion_matrix, precision_recall, row_normalize, ConfusionMatrix, Misclassification};
use cooccur::occupancy::{DerivedQuantity, OccupancyParams};
use cooccur::report::{estimate_rows, write_estimates_csv, FitDocument};
use cooccur::simulation::{
    corrupt_labels, deployments_from_history, run_experiment_at_sites, scenario, simulate_history_with_states,
    synthesize_records, BackgroundSpecies, RecordSynthesis, SimSpec,
};
use cooccur::survey::io::{write_deployments_csv, write_images_csv, HistoryJson};
use cooccur::survey::{
    build_detection_history, history_summary, DetectionHistory, HistorySummary, ImageRecord, SpeciesLabel,
};
use cooccur::{Experiment, Fit};

use crate::output::{read_deployments, read_history, read_images, read_json, Output};
use crate::{
    Command, ConfusionSource, CorruptArgs, DeriveArgs, ExperimentArgs, FitArgs, FitSettings, IngestArgs, MetricsArgs,
    Preset, SimFormat, SimulateArgs,
};

pub fn run(command: &Command, out: &Path) -> Result<()> {
    let out = Output::new(out)?;
    match command {
        Command::Ingest(a) => ingest(a, &out),
        Command::Metrics(a) => metrics(a, &out),
        Command::Fit(a) => fit_cmd(a, &out),
        Command::Derive(a) => derive(a, &out),
        Command::Simulate(a) => simulate(a, &out),
        Command::Corrupt(a) => corrupt(a, &out),
        Command::Experiment(a) => experiment(a, &out),
    }
}

fn parse_numbers(list: &str, what: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("{what}: {v:?} is not a number"))
        })
        .collect()
}

fn parse_sites(list: &str) -> Vec<String> {
    list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn fit_options(s: &FitSettings) -> FitOptions {
    FitOptions {
        n_starts: s.starts,
        seed: s.seed,
        grad_tol: s.grad_tol,
        max_iter: s.max_iter,
        ..FitOptions::default()
    }
}

fn target_index(target: Option<&str>, species: &[SpeciesLabel]) -> Result<usize> {
    match target {
        None => Ok(0),
        Some(t) => species
            .iter()
            .position(|s| s.as_str() == t)
            .ok_or_else(|| anyhow!("target species {t:?} is not modelled")),
    }
}

/// Every marginal, then the conditionals of `target` on each other species.
fn reported_quantities(species: usize, target: usize) -> Vec<DerivedQuantity> {
    let mut q: Vec<_> = (0..species).map(|s| DerivedQuantity::Marginal { species: s }).collect();
    q.extend(DerivedQuantity::conditionals_of(target, species));
    q
}

fn write_summary<W: Write>(w: W, summary: &HistorySummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["species", "detections", "active_cells", "sites_detected", "naive_occupancy"])?;
    for s in &summary.species {
        w.write_record([
            s.species.to_string(),
            s.detections.to_string(),
            s.active_cells.to_string(),
            s.sites_detected.to_string(),
            s.naive_occupancy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct IngestBody<'a> {
    #[serde(flatten)]
    history: HistoryJson,
    summary: &'a HistorySummary,
    unknown_species: &'a [SpeciesLabel],
    records_outside_effort: usize,
}

fn ingest(args: &IngestArgs, out: &Output) -> Result<()> {
    let r = &args.records;
    let records = read_images(&r.images)?;
    let deployments = read_deployments(r.deployments.as_ref())?;
    let species = SpeciesLabel::parse_list(&r.species)?;
    let built = build_detection_history(&records, deployments.as_deref(), &species, r.label_source.into())?;
    let summary = history_summary(&built.history);
    out.json(
        "history.json",
        "ingest",
        args,
        IngestBody {
            history: HistoryJson::from(&built.history),
            summary: &summary,
            unknown_species: &built.unknown_species,
            records_outside_effort: built.records_outside_effort,
        },
    )?;
    out.write("summary.csv", |w| write_summary(w, &summary))
}

fn metrics(args: &MetricsArgs, out: &Output) -> Result<()> {
    let records = read_images(&args.images)?;
    let cm = confusion_matrix(&records)?;
    let report = precision_recall(&cm);
    for c in &report.classes {
        if c.precision.is_none() || c.recall.is_none() {
            warn!("{}: precision or recall undefined (zero denominator)", c.label);
        }
    }
    out.json("metrics.json", "metrics", args, &report)?;
    out.write("confusion.csv", |w| Ok(cm.write_csv(w)?))
}

fn fit_input(args: &FitArgs) -> Result<DetectionHistory> {
    if let Some(path) = &args.input.history {
        return read_history(path);
    }
    let images = args.input.images.as_ref().expect("clap requires one input");
    let species = args.species.as_deref().expect("clap requires --species with --images");
    let records = read_images(images)?;
    let deployments = read_deployments(args.deployments.as_ref())?;
    let species = SpeciesLabel::parse_list(species)?;
    Ok(build_detection_history(&records, deployments.as_deref(), &species, args.label_source.into())?.history)
}

fn fit_cmd(args: &FitArgs, out: &Output) -> Result<()> {
    let h = fit_input(args)?;
    let target = target_index(args.target.as_deref(), h.species())?;
    let result: Fit = fit(&h, &fit_options(&args.settings))?;
    let quantities = reported_quantities(h.n_species(), target);
    let doc = FitDocument::new(&result, h.species(), &quantities, args.settings.level)?;
    out.json("fit-result.json", "fit", args, &doc)?;
    out.write("derived.csv", |w| Ok(write_estimates_csv(w, &[("fit", &doc.estimates)])?))
}

fn derive(args: &DeriveArgs, out: &Output) -> Result<()> {
    let doc: FitDocument = read_json(&args.fit)?;
    let result = doc.to_fit()?;
    let target = target_index(args.target.as_deref(), &doc.species)?;
    let quantities = reported_quantities(doc.species.len(), target);
    let rows = estimate_rows(&result, &doc.species, &quantities, args.level)?;
    if result.vcov.is_none() {
        warn!("fit has no variance matrix, intervals omitted");
    }
    out.write("derived.csv", |w| Ok(write_estimates_csv(w, &[("fit", &rows)])?))
}

#[derive(Serialize)]
struct SimulateBody {
    #[serde(flatten)]
    history: HistoryJson,
    /// Latent occupancy state of each site.
    states: Vec<usize>,
}

fn simulate(args: &SimulateArgs, out: &Output) -> Result<()> {
    let custom = args.psi.is_some();
    let (params, default_species) = match (&args.psi, &args.p) {
        (Some(psi), Some(p)) => {
            let params = OccupancyParams::new(parse_numbers(psi, "--psi")?, parse_numbers(p, "--p")?)?;
            let names = (0..params.n_species()).map(|s| format!("sp{s}")).collect::<Vec<_>>().join(",");
            (params, SpeciesLabel::parse_list(&names)?)
        }
        _ => (scenario::params(), scenario::species()),
    };
    let species = match &args.species {
        Some(list) => SpeciesLabel::parse_list(list)?,
        None => default_species,
    };
    let spec = SimSpec::new(params, args.sites, args.occasions, args.seed)
        .with_species(species)
        .with_missing_rate(args.missing_rate);
    let (h, states) = simulate_history_with_states(&spec)?;
    out.json(
        "history.json",
        "simulate",
        args,
        SimulateBody {
            history: HistoryJson::from(&h),
            states,
        },
    )?;
    if args.format == SimFormat::Images {
        let synthesis = if custom {
            RecordSynthesis {
                extra_images_mean: 4.0,
                background: vec![BackgroundSpecies {
                    label: scenario::other_label(),
                    presence: 1.0,
                    extra_images_mean: 9.0,
                }],
                ..RecordSynthesis::default()
            }
        } else {
            scenario::record_synthesis()
        };
        let records = synthesize_records(&h, &synthesis, args.seed)?;
        out.write("images.csv", |w| Ok(write_images_csv(w, &records)?))?;
        out.write("deployments.csv", |w| Ok(write_deployments_csv(w, &deployments_from_history(&h))?))?;
    }
    Ok(())
}

fn misclassification(source: &ConfusionSource, default: Option<Preset>, records: &[ImageRecord]) -> Result<Misclassification> {
    if let Some(path) = &source.confusion {
        let cm: ConfusionMatrix = ConfusionMatrix::read_csv(
            std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
        )
        .with_context(|| format!("reading {}", path.display()))?;
        return Ok(row_normalize(&cm)?);
    }
    match source.preset.or(default) {
        Some(Preset::Identity) => {
            let mut labels: Vec<SpeciesLabel> = records.iter().map(|r| r.label_true.clone()).collect();
            labels.sort();
            labels.dedup();
            Ok(Misclassification::identity(&labels))
        }
        Some(Preset::Transfer) => Ok(row_normalize(&scenario::transfer_confusion())?),
        None => bail!("one of --confusion or --preset is required"),
    }
}

fn corrupt(args: &CorruptArgs, out: &Output) -> Result<()> {
    let records = read_images(&args.images)?;
    let probs = misclassification(&args.source, None, &records)?;
    let corrupted = corrupt_labels(&records, &probs, args.seed)?;
    out.write("images.csv", |w| Ok(write_images_csv(w, &corrupted)?))
}

#[derive(Serialize)]
struct ExperimentBody<'a> {
    classified_sites: Option<&'a [String]>,
    max_marginal_delta: f64,
    threshold: f64,
    within_threshold: bool,
    #[serde(flatten)]
    report: &'a Experiment,
}

fn experiment(args: &ExperimentArgs, out: &Output) -> Result<()> {
    let (records, deployments, species, classified_sites) = match &args.images {
        Some(images) => {
            let species = args.species.as_deref().expect("clap requires --species with --images");
            (
                read_images(images)?,
                read_deployments(args.deployments.as_ref())?,
                SpeciesLabel::parse_list(species)?,
                args.classified_sites.as_deref().map(parse_sites),
            )
        }
        None => {
            let spec = SimSpec::new(scenario::params(), args.sites, args.occasions, args.settings.seed)
                .with_species(scenario::species());
            let (h, _) = simulate_history_with_states(&spec)?;
            let records = synthesize_records(&h, &scenario::record_synthesis(), args.settings.seed)?;
            let sites = match &args.classified_sites {
                Some(list) => parse_sites(list),
                None => scenario::classified_sites(&h),
            };
            (records, Some(deployments_from_history(&h)), scenario::species(), Some(sites))
        }
    };
    let target = target_index(args.target.as_deref(), &species)?;
    let probs = misclassification(&args.source, Some(Preset::Transfer), &records)?;
    let report: Experiment = run_experiment_at_sites(
        &records,
        deployments.as_deref(),
        &species,
        &probs,
        &fit_options(&args.settings),
        args.settings.seed,
        classified_sites.as_deref(),
    )?;
    let max_delta = report.max_marginal_delta();
    if max_delta > args.threshold {
        warn!(
            "largest marginal occupancy difference {max_delta:.4} exceeds the threshold {}",
            args.threshold
        );
    }

    let quantities = reported_quantities(species.len(), target);
    let level = args.settings.level;
    let truth_rows = estimate_rows(&report.fit_truth, &species, &quantities, level)?;
    let classified_rows = estimate_rows(&report.fit_classified, &species, &quantities, level)?;
    out.json(
        "experiment.json",
        "experiment",
        args,
        ExperimentBody {
            classified_sites: classified_sites.as_deref(),
            max_marginal_delta: max_delta,
            threshold: args.threshold,
            within_threshold: max_delta <= args.threshold,
            report: &report,
        },
    )?;
    out.write("figures.csv", |w| {
        Ok(write_estimates_csv(w, &[("truth", &truth_rows), ("classified", &classified_rows)])?)
    })
}
