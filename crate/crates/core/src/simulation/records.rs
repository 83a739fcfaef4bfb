//! Turning a simulated detection history back into image records, so the
//! corruption experiment can run on data with a known generating model.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveTime, TimeZone, Utc};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::survey::{DeploymentWindow, DetectionHistory, ImageRecord, SpeciesLabel};

/// A species outside the modelled set that is photographed at surveyed sites.
/// Its images are what a classifier can turn into false detections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSpecies {
    pub label: SpeciesLabel,
    /// Probability of appearing at a surveyed site in a given month.
    pub presence: f64,
    /// Images per appearance are `1 + Poisson(extra_images_mean)`.
    pub extra_images_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordSynthesis {
    /// Images per detected site-month are `1 + Poisson(extra_images_mean)`.
    pub extra_images_mean: f64,
    /// Per-species overrides of `extra_images_mean`.
    #[serde(default)]
    pub species_extra_images: BTreeMap<SpeciesLabel, f64>,
    pub background: Vec<BackgroundSpecies>,
}

impl Default for RecordSynthesis {
    fn default() -> Self {
        RecordSynthesis {
            extra_images_mean: 0.0,
            species_extra_images: BTreeMap::new(),
            background: Vec::new(),
        }
    }
}

impl RecordSynthesis {
    fn extra_for(&self, label: &SpeciesLabel) -> f64 {
        self.species_extra_images.get(label).copied().unwrap_or(self.extra_images_mean)
    }
}

fn image_count<R: Rng>(rng: &mut R, extra_mean: f64) -> Result<u64> {
    if extra_mean == 0.0 {
        return Ok(1);
    }
    let pois = Poisson::new(extra_mean)
        .map_err(|e| Error::InvalidOption(format!("image count mean {extra_mean}: {e}")))?;
    Ok(1 + pois.sample(rng) as u64)
}

/// Image records consistent with `h`: every detection becomes one or more
/// true-labelled images inside its month, and background species add images
/// at surveyed site-months. Records are ordered by site, then month.
pub fn synthesize_records(h: &DetectionHistory, opts: &RecordSynthesis, seed: u64) -> Result<Vec<ImageRecord>> {
    let bad = |v: f64| !(v.is_finite() && v >= 0.0);
    if bad(opts.extra_images_mean)
        || opts.species_extra_images.values().any(|&v| bad(v))
        || opts.background.iter().any(|b| bad(b.extra_images_mean) || !(0.0..=1.0).contains(&b.presence)) {
        return Err(Error::InvalidOption("image-count means must be >= 0 and presences in [0, 1]".into()));
    }
    if let Some(b) = opts.background.iter().find(|b| h.species().contains(&b.label)) {
        return Err(Error::InvalidOption(format!("background species {} is also modelled", b.label)));
    }
    let per_site: Vec<Vec<ImageRecord>> = (0..h.n_sites())
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Purpose::SynthesizeRecords, i as u64);
            let mut out = Vec::new();
            for (t, month) in h.occasions().iter().enumerate() {
                if !h.is_active(i, t) {
                    continue;
                }
                let days = month.last_day().day();
                let mut emit = |rng: &mut rand_chacha::ChaCha8Rng, label: &SpeciesLabel, n: u64| {
                    for _ in 0..n {
                        let day = rng.random_range(1..=days);
                        let secs = rng.random_range(0..86_400u32);
                        let date = month.first_day().with_day(day).expect("day in month");
                        let time = NaiveTime::from_num_seconds_from_midnight_opt(secs, 0).expect("valid time");
                        out.push(ImageRecord {
                            site_id: h.sites()[i].clone(),
                            timestamp: Utc.from_utc_datetime(&date.and_time(time)),
                            label_true: label.clone(),
                            label_pred: None,
                        });
                    }
                };
                for (s, label) in h.species().iter().enumerate() {
                    if h.get(s, i, t) == Some(true) {
                        let n = image_count(&mut rng, opts.extra_for(label))?;
                        emit(&mut rng, label, n);
                    }
                }
                for b in &opts.background {
                    if rng.random::<f64>() < b.presence {
                        let n = image_count(&mut rng, b.extra_images_mean)?;
                        emit(&mut rng, &b.label, n);
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_site.into_iter().flatten().collect())
}

/// Deployment windows covering exactly the surveyed months of each site: one
/// window per run of consecutive surveyed months.
pub fn deployments_from_history(h: &DetectionHistory) -> Vec<DeploymentWindow> {
    let mut out = Vec::new();
    for (i, site) in h.sites().iter().enumerate() {
        let mut run_start = None;
        for t in 0..=h.n_occasions() {
            let active = t < h.n_occasions() && h.is_active(i, t);
            match (active, run_start) {
                (true, None) => run_start = Some(t),
                (false, Some(start)) => {
                    out.push(DeploymentWindow {
                        site_id: site.clone(),
                        start: h.occasions()[start].first_day(),
                        end: h.occasions()[t - 1].last_day(),
                    });
                    run_start = None;
                }
                _ => {}
            }
        }
    }
    out
}
