//! Built-in scenario modelled on a lynx and prey camera-trap survey in the
//! Jura and Ain: three species (lynx, roe deer, chamois), 29 sites, nine
//! monthly occasions (March to November) and a classifier trained on the 18
//! Jura sites that transfers poorly to the 11 Ain sites.

use std::collections::BTreeMap;

use super::{BackgroundSpecies, RecordSynthesis};
use crate::metrics::ConfusionMatrix;
use crate::occupancy::{marginal_occupancy, OccupancyParams};
use crate::survey::{DetectionHistory, SpeciesLabel};

pub const SITES: usize = 29;
pub const OCCASIONS: usize = 9;
/// The last `CLASSIFIED_SITES` sites are labelled by the classifier.
pub const CLASSIFIED_SITES: usize = 11;

/// Images per class at the classified sites over the whole season. Roe deer
/// and chamois are the survey's counts; lynx is assumed close to its count at
/// the training sites; "other" is the remainder of the 18044 images.
pub const CLASSIFIED_SITE_IMAGES: [(&str, f64); 4] =
    [("lynx", 300.0), ("roe deer", 860.0), ("chamois", 780.0), ("other", 16_104.0)];

/// Modelled species, in model order.
pub fn species() -> Vec<SpeciesLabel> {
    ["lynx", "roe deer", "chamois"]
        .into_iter()
        .map(|s| SpeciesLabel::new(s).expect("valid label"))
        .collect()
}

/// Detection probabilities of lynx, roe deer and chamois.
pub const DETECTION: [f64; 3] = [0.51, 0.63, 0.61];

/// Occupancy built from roe deer present with probability 0.9, chamois
/// present with probability 0.8 alongside roe deer and 0.5 without, and lynx
/// more likely where its prey occur (0.8 with both, 0.7 with roe deer only,
/// 0.5 with chamois only, 0.3 with neither). Marginals: lynx 0.742, roe deer
/// 0.9, chamois 0.77.
pub fn params() -> OccupancyParams<f64> {
    // state bits: lynx = 1, roe deer = 2, chamois = 4
    let psi = vec![0.035, 0.015, 0.054, 0.126, 0.025, 0.025, 0.144, 0.576];
    OccupancyParams::new(psi, DETECTION.to_vec()).expect("valid scenario")
}

/// Label used for every non-modelled species.
pub fn other_label() -> SpeciesLabel {
    SpeciesLabel::new("other").expect("valid label")
}

/// Confusion counts chosen so that recall and precision of the three
/// modelled species match the transfer-site classifier to two decimals:
///
/// | class    | precision | recall |
/// |----------|-----------|--------|
/// | chamois  | 0.82      | 0.08   |
/// | lynx     | 0.77      | 0.89   |
/// | roe deer | 0.67      | 0.86   |
///
/// Most chamois images go to roe deer or to other species; the other-species
/// row is large, as in camera-trap data dominated by people and vehicles.
pub fn transfer_confusion() -> ConfusionMatrix {
    let labels = ["chamois", "lynx", "other", "roe deer"]
        .into_iter()
        .map(|s| SpeciesLabel::new(s).expect("valid label"))
        .collect();
    ConfusionMatrix::new(
        labels,
        vec![
            vec![64, 0, 436, 300],
            vec![0, 267, 33, 0],
            vec![10, 80, 15_850, 60],
            vec![4, 0, 115, 731],
        ],
    )
    .expect("valid scenario")
}

/// Sites whose images go through the classifier.
pub fn classified_sites(h: &DetectionHistory) -> Vec<String> {
    let n = h.n_sites();
    h.sites()[n.saturating_sub(CLASSIFIED_SITES)..].to_vec()
}

/// Image bursts sized so that, in expectation, the classified sites produce
/// `CLASSIFIED_SITE_IMAGES`: a modelled species yields its count divided by
/// the expected number of detected site-months, and other species appear in
/// every surveyed site-month.
pub fn record_synthesis() -> RecordSynthesis {
    let params = params();
    let site_months = (CLASSIFIED_SITES * OCCASIONS) as f64;
    let target: BTreeMap<&str, f64> = CLASSIFIED_SITE_IMAGES.into_iter().collect();
    let species_extra_images = species()
        .into_iter()
        .enumerate()
        .map(|(s, label)| {
            let marginal = marginal_occupancy(&params, s).expect("species in range");
            let detected = site_months * marginal * params.p()[s];
            (label.clone(), target[label.as_str()] / detected - 1.0)
        })
        .collect();
    RecordSynthesis {
        extra_images_mean: 0.0,
        species_extra_images,
        background: vec![BackgroundSpecies {
            label: other_label(),
            presence: 1.0,
            extra_images_mean: target["other"] / site_months - 1.0,
        }],
    }
}
