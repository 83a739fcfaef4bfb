//! Seeded generative engine: detection histories from known parameters, label
//! corruption through a misclassification matrix, and the ground-truth versus
//! classified comparison.

mod corrupt;
mod experiment;
mod records;
pub mod scenario;

pub use corrupt::corrupt_labels;
pub use experiment::{run_experiment, run_experiment_at_sites, ExperimentReport, QuantityDelta};
pub use records::{deployments_from_history, synthesize_records, BackgroundSpecies, RecordSynthesis};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::occupancy::OccupancyParams;
use crate::rng::{stream, Purpose};
use crate::scalar::Scalar;
use crate::survey::{DetectionHistory, SpeciesLabel, YearMonth};

/// What to simulate.
#[derive(Clone, Debug)]
pub struct SimSpec<T> {
    pub params: OccupancyParams<T>,
    pub sites: usize,
    pub occasions: usize,
    /// Probability that a site-occasion is not surveyed.
    pub missing_rate: f64,
    pub seed: u64,
    /// Names for the species rows; defaults to `sp0`, `sp1`, ...
    pub species: Vec<SpeciesLabel>,
    pub first_occasion: YearMonth,
}

impl<T: Scalar> SimSpec<T> {
    pub fn new(params: OccupancyParams<T>, sites: usize, occasions: usize, seed: u64) -> Self {
        let species = (0..params.n_species())
            .map(|s| SpeciesLabel::new(format!("sp{s}")).expect("valid label"))
            .collect();
        SimSpec {
            params,
            sites,
            occasions,
            missing_rate: 0.0,
            seed,
            species,
            first_occasion: YearMonth { year: 2017, month: 3 },
        }
    }

    pub fn with_species(mut self, species: Vec<SpeciesLabel>) -> Self {
        self.species = species;
        self
    }

    pub fn with_missing_rate(mut self, rate: f64) -> Self {
        self.missing_rate = rate;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.sites == 0 || self.occasions == 0 {
            return Err(Error::InvalidOption("need at least one site and one occasion".into()));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::InvalidOption(format!(
                "missing rate {} not in [0, 1)",
                self.missing_rate
            )));
        }
        if self.species.len() != self.params.n_species() {
            return Err(Error::InvalidOption(format!(
                "{} species names for {} species",
                self.species.len(),
                self.params.n_species()
            )));
        }
        Ok(())
    }
}

/// Draws a category from `weights` (summing to one) with one uniform draw.
pub(crate) fn draw_category(weights: impl IntoIterator<Item = f64>, u: f64) -> usize {
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (k, w) in weights.into_iter().enumerate() {
        if w > 0.0 {
            last_positive = k;
        }
        cum += w;
        if u < cum {
            return k;
        }
    }
    // rounding left u above the final cumulative sum
    last_positive
}

/// Simulates a detection history and returns the latent state of every site.
///
/// Site `i` uses its own random stream: one draw for the latent state, then
/// one per (species, occasion) for detection, then one per occasion for
/// missingness.
pub fn simulate_history_with_states<T: Scalar>(spec: &SimSpec<T>) -> Result<(DetectionHistory, Vec<usize>)> {
    spec.validate()?;
    let s_count = spec.params.n_species();
    let t_count = spec.occasions;
    let psi: Vec<f64> = spec.params.psi().iter().map(|v| v.as_f64()).collect();
    let p: Vec<f64> = spec.params.p().iter().map(|v| v.as_f64()).collect();

    let per_site: Vec<(usize, Vec<Option<bool>>)> = (0..spec.sites)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(spec.seed, Purpose::SimulateSite, i as u64);
            let z = draw_category(psi.iter().copied(), rng.random::<f64>());
            let mut cells = vec![None; s_count * t_count];
            for s in 0..s_count {
                let present = z >> s & 1 == 1;
                for t in 0..t_count {
                    let u: f64 = rng.random();
                    cells[s * t_count + t] = Some(present && u < p[s]);
                }
            }
            for t in 0..t_count {
                if rng.random::<f64>() < spec.missing_rate {
                    for s in 0..s_count {
                        cells[s * t_count + t] = None;
                    }
                }
            }
            (z, cells)
        })
        .collect();

    let mut cells = vec![None; s_count * spec.sites * t_count];
    for (i, (_, site_cells)) in per_site.iter().enumerate() {
        for s in 0..s_count {
            let dst = (s * spec.sites + i) * t_count;
            cells[dst..dst + t_count].copy_from_slice(&site_cells[s * t_count..(s + 1) * t_count]);
        }
    }
    // zero-padded so lexicographic and numeric site order agree
    let width = spec.sites.to_string().len().max(4);
    let history = DetectionHistory::new(
        spec.species.clone(),
        (0..spec.sites).map(|i| format!("site{:0width$}", i + 1)).collect(),
        (0..t_count).map(|t| spec.first_occasion.offset(t)).collect(),
        cells,
    )?;
    Ok((history, per_site.into_iter().map(|(z, _)| z).collect()))
}

pub fn simulate_history<T: Scalar>(spec: &SimSpec<T>) -> Result<DetectionHistory> {
    Ok(simulate_history_with_states(spec)?.0)
}
