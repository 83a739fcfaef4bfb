use std::collections::HashSet;

use serde::Serialize;

use super::corrupt_labels;
use crate::error::Result;
use crate::estimation::{fit, FitOptions, FitResult};
use crate::metrics::{confusion_matrix, precision_recall, Misclassification, MetricsReport};
use crate::occupancy::DerivedQuantity;
use crate::scalar::Scalar;
use crate::survey::{
    build_detection_history, history_summary, DeploymentWindow, DetectionHistory, HistorySummary, ImageRecord,
    LabelSource, SpeciesLabel,
};

/// Absolute difference of one estimate between the two datasets.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuantityDelta<T> {
    pub name: String,
    /// `None` for detection probabilities.
    pub quantity: Option<DerivedQuantity>,
    pub truth: T,
    pub classified: T,
    pub delta: T,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport<T> {
    pub species: Vec<SpeciesLabel>,
    #[serde(skip)]
    pub truth_history: DetectionHistory,
    #[serde(skip)]
    pub classified_history: DetectionHistory,
    pub truth_summary: HistorySummary,
    pub classified_summary: HistorySummary,
    pub fit_truth: FitResult<T>,
    pub fit_classified: FitResult<T>,
    /// Marginals, pairwise conditionals, then detection probabilities.
    pub deltas: Vec<QuantityDelta<T>>,
    /// Realized classifier performance on the corrupted records.
    pub metrics: MetricsReport,
}

impl<T: Scalar> ExperimentReport<T> {
    pub fn max_marginal_delta(&self) -> T {
        self.deltas
            .iter()
            .filter(|d| matches!(d.quantity, Some(DerivedQuantity::Marginal { .. })))
            .fold(T::zero(), |m, d| m.max(d.delta))
    }
}

/// Fits the model to the ground-truth labels and to labels corrupted through
/// `probs`, and reports how far the estimates moved.
///
/// Corruption happens per image, before aggregation into monthly detections.
/// Both fits use the same `opts` (seed included).
pub fn run_experiment<T: Scalar>(
    records: &[ImageRecord],
    deployments: Option<&[DeploymentWindow]>,
    species_filter: &[SpeciesLabel],
    probs: &Misclassification,
    opts: &FitOptions,
    seed: u64,
) -> Result<ExperimentReport<T>> {
    run_experiment_at_sites(records, deployments, species_filter, probs, opts, seed, None)
}

/// Like [`run_experiment`], but only images from `classified_sites` go
/// through the classifier; images from other sites keep their true label in
/// the classified dataset. `None` classifies every site.
///
/// The reported metrics cover the classified images only.
pub fn run_experiment_at_sites<T: Scalar>(
    records: &[ImageRecord],
    deployments: Option<&[DeploymentWindow]>,
    species_filter: &[SpeciesLabel],
    probs: &Misclassification,
    opts: &FitOptions,
    seed: u64,
    classified_sites: Option<&[String]>,
) -> Result<ExperimentReport<T>> {
    let (classified, machine_labelled) = classify(records, probs, seed, classified_sites)?;
    let truth_history = build_detection_history(records, deployments, species_filter, LabelSource::True)?.history;
    let classified_history =
        build_detection_history(&classified, deployments, species_filter, LabelSource::Predicted)?.history;
    let fit_truth: FitResult<T> = fit(&truth_history, opts)?;
    let fit_classified: FitResult<T> = fit(&classified_history, opts)?;

    let n = species_filter.len();
    let mut deltas = Vec::new();
    for q in DerivedQuantity::all(n) {
        let a = q.evaluate(&fit_truth.params_hat)?;
        let b = q.evaluate(&fit_classified.params_hat)?;
        deltas.push(QuantityDelta {
            name: q.describe(species_filter),
            quantity: Some(q),
            truth: a,
            classified: b,
            delta: (a - b).abs(),
        });
    }
    for (s, label) in species_filter.iter().enumerate() {
        let a = fit_truth.params_hat.p()[s];
        let b = fit_classified.params_hat.p()[s];
        deltas.push(QuantityDelta {
            name: format!("p({label})"),
            quantity: None,
            truth: a,
            classified: b,
            delta: (a - b).abs(),
        });
    }

    Ok(ExperimentReport {
        species: species_filter.to_vec(),
        truth_summary: history_summary(&truth_history),
        classified_summary: history_summary(&classified_history),
        truth_history,
        classified_history,
        fit_truth,
        fit_classified,
        deltas,
        metrics: precision_recall(&confusion_matrix(&machine_labelled)?),
    })
}

/// Returns every record with a predicted label, and the subset whose
/// prediction came from the classifier.
fn classify(
    records: &[ImageRecord],
    probs: &Misclassification,
    seed: u64,
    sites: Option<&[String]>,
) -> Result<(Vec<ImageRecord>, Vec<ImageRecord>)> {
    let Some(sites) = sites else {
        let all = corrupt_labels(records, probs, seed)?;
        return Ok((all.clone(), all));
    };
    let sites: HashSet<&str> = sites.iter().map(String::as_str).collect();
    let (picked, kept): (Vec<usize>, Vec<usize>) = (0..records.len()).partition(|&k| sites.contains(records[k].site_id.as_str()));
    let subset: Vec<ImageRecord> = picked.iter().map(|&k| records[k].clone()).collect();
    let machine_labelled = corrupt_labels(&subset, probs, seed)?;
    let mut all: Vec<Option<ImageRecord>> = vec![None; records.len()];
    for (&k, r) in picked.iter().zip(&machine_labelled) {
        all[k] = Some(r.clone());
    }
    for k in kept {
        all[k] = Some(ImageRecord {
            label_pred: Some(records[k].label_true.clone()),
            ..records[k].clone()
        });
    }
    Ok((all.into_iter().map(|r| r.expect("every record assigned")).collect(), machine_labelled))
}
