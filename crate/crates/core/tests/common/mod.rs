//! Independent oracles shared by the integration and acceptance tests.
//!
//! Nothing here goes through the crate's likelihood code: the brute-force NLL
//! multiplies Bernoulli terms cell by cell in linear space.

#![allow(dead_code)]

use cooccur::occupancy::OccupancyParams;
use cooccur::survey::{DetectionHistory, SpeciesLabel, YearMonth};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// `-sum_i ln sum_z psi_z prod_s prod_t (z_s p_s)^y (1 - z_s p_s)^(1 - y)`
/// over non-missing cells, enumerating states and cells naively.
pub fn brute_force_nll(psi: &[f64], p: &[f64], h: &DetectionHistory) -> f64 {
    let mut nll = 0.0;
    for i in 0..h.n_sites() {
        let mut site_lik = 0.0;
        for (z, &w) in psi.iter().enumerate() {
            let mut prod = w;
            for (s, &ps) in p.iter().enumerate() {
                let zs = ((z >> s) & 1) as f64;
                for t in 0..h.n_occasions() {
                    if let Some(y) = h.get(s, i, t) {
                        let q = zs * ps;
                        let y = y as i32;
                        prod *= q.powi(y) * (1.0 - q).powi(1 - y);
                    }
                }
            }
            site_lik += prod;
        }
        nll -= site_lik.ln();
    }
    nll
}

/// Softmax / logistic map written out independently of the crate.
pub fn naive_params(theta: &[f64], species: usize) -> (Vec<f64>, Vec<f64>) {
    let k = 1usize << species;
    let mut expo = vec![1.0];
    expo.extend(theta[..k - 1].iter().map(|v| v.exp()));
    let total: f64 = expo.iter().sum();
    let psi = expo.iter().map(|v| v / total).collect();
    let p = theta[k - 1..].iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect();
    (psi, p)
}

/// Central finite-difference gradient of `f`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[k] += step;
            dn[k] -= step;
            (f(&up) - f(&dn)) / (2.0 * step)
        })
        .collect()
}

pub fn labels(n: usize) -> Vec<SpeciesLabel> {
    (0..n).map(|s| SpeciesLabel::new(format!("sp{s}")).unwrap()).collect()
}

/// Random history; each site-occasion is missing with probability `missing`.
pub fn random_history<R: Rng>(rng: &mut R, species: usize, sites: usize, occasions: usize, missing: f64) -> DetectionHistory {
    let mut cells = vec![None; species * sites * occasions];
    for i in 0..sites {
        for t in 0..occasions {
            if rng.random::<f64>() < missing {
                continue;
            }
            for s in 0..species {
                cells[(s * sites + i) * occasions + t] = Some(rng.random::<f64>() < 0.4);
            }
        }
    }
    DetectionHistory::new(
        labels(species),
        (0..sites).map(|i| format!("site{i:03}")).collect(),
        (0..occasions).map(|t| YearMonth::new(2017, 1).unwrap().offset(t)).collect(),
        cells,
    )
    .unwrap()
}

pub fn random_theta<R: Rng>(rng: &mut R, species: usize, scale: f64) -> Vec<f64> {
    (0..(1 << species) - 1 + species)
        .map(|_| rng.random_range(-scale..scale))
        .collect()
}

/// Sum of `psi[z]` over states accepted by `keep`, by plain enumeration.
pub fn enumerate_states(psi: &[f64], keep: impl Fn(&[bool]) -> bool, species: usize) -> f64 {
    let mut total = 0.0;
    for (z, &w) in psi.iter().enumerate() {
        let bits: Vec<bool> = (0..species).map(|s| (z >> s) & 1 == 1).collect();
        if keep(&bits) {
            total += w;
        }
    }
    total
}

pub fn params_of(psi: Vec<f64>, p: Vec<f64>) -> OccupancyParams<f64> {
    OccupancyParams::new(psi, p).unwrap()
}
