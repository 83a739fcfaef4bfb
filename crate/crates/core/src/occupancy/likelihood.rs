//! Marginal likelihood of a detection history over the latent occupancy states.
//!
//! With species-specific detection probabilities a site's data enter the
//! likelihood only through, per species, the number of detections `d` and the
//! number of surveyed occasions `n`:
//!
//! ```text
//! L_i = sum_z psi[z] * prod_s [ z_s ? p_s^d (1 - p_s)^(n - d) : (d == 0) ]
//! ```
//!
//! Terms are accumulated in log space. Sites are processed in fixed blocks and
//! block sums are reduced in block order, so the result does not depend on
//! the number of worker threads.

use rayon::prelude::*;

use super::params::{check_species, log_psi, theta_len, OccupancyParams};
use crate::error::{Error, Result};
use crate::scalar::{ln_logistic, log_sum_exp, logistic, Scalar};
use crate::survey::DetectionHistory;

const BLOCK: usize = 64;

/// Per-site detection counts, the only view of the data the model needs.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteCounts {
    species: usize,
    // detections per (site, species), site-major
    detections: Vec<u32>,
    // surveyed occasions per site
    active: Vec<u32>,
}

impl SiteCounts {
    pub fn from_history(h: &DetectionHistory) -> Result<Self> {
        let species = h.n_species();
        check_species(species)?;
        let mut detections = vec![0u32; h.n_sites() * species];
        let mut active = vec![0u32; h.n_sites()];
        for i in 0..h.n_sites() {
            for t in 0..h.n_occasions() {
                if !h.is_active(i, t) {
                    continue;
                }
                active[i] += 1;
                for s in 0..species {
                    if h.get(s, i, t) == Some(true) {
                        detections[i * species + s] += 1;
                    }
                }
            }
        }
        Ok(SiteCounts {
            species,
            detections,
            active,
        })
    }

    pub fn n_species(&self) -> usize {
        self.species
    }

    pub fn n_sites(&self) -> usize {
        self.active.len()
    }

    /// Sites with at least one surveyed occasion.
    pub fn n_observed_sites(&self) -> usize {
        self.active.iter().filter(|&&n| n > 0).count()
    }

    fn site(&self, i: usize) -> (&[u32], u32) {
        let s = self.species;
        (&self.detections[i * s..(i + 1) * s], self.active[i])
    }

    fn blocks(&self) -> usize {
        self.n_sites().div_ceil(BLOCK)
    }

    fn block_sites(&self, b: usize) -> std::ops::Range<usize> {
        b * BLOCK..((b + 1) * BLOCK).min(self.n_sites())
    }

    /// Negative log-likelihood for (possibly boundary) parameters.
    pub fn nll<T: Scalar>(&self, params: &OccupancyParams<T>) -> Result<T> {
        self.check_params(params.n_species())?;
        let ln_psi: Vec<T> = params.psi().iter().map(|v| v.ln()).collect();
        let ln_p: Vec<T> = params.p().iter().map(|v| v.ln()).collect();
        let ln_q: Vec<T> = params.p().iter().map(|&v| (-v).ln_1p()).collect();
        let per_block = |b: usize| {
            let mut scratch = StateScratch::new(self.species);
            self.block_sites(b)
                .map(|i| -self.site_log_lik(i, &ln_psi, &ln_p, &ln_q, &mut scratch))
                .fold(T::zero(), |a, v| a + v)
        };
        Ok(reduce_blocks(self.blocks(), per_block, T::zero(), |a, v| a + v))
    }

    /// Negative log-likelihood and its gradient with respect to `theta`.
    pub fn nll_and_gradient<T: Scalar>(&self, theta: &[T]) -> Result<(T, Vec<T>)> {
        let expected = theta_len(self.species);
        if theta.len() != expected {
            return Err(Error::ThetaLength {
                expected,
                got: theta.len(),
            });
        }
        let n_ratio = (1 << self.species) - 1;
        let ln_psi = log_psi(&theta[..n_ratio]);
        let psi: Vec<T> = ln_psi.iter().map(|v| v.exp()).collect();
        let logits = &theta[n_ratio..];
        let p: Vec<T> = logits.iter().map(|&x| logistic(x)).collect();
        let ln_p: Vec<T> = logits.iter().map(|&x| ln_logistic(x)).collect();
        let ln_q: Vec<T> = logits.iter().map(|&x| ln_logistic(-x)).collect();

        let per_block = |b: usize| {
            let mut scratch = StateScratch::new(self.species);
            let mut nll = T::zero();
            let mut grad = vec![T::zero(); expected];
            for i in self.block_sites(b) {
                nll = nll - self.site_gradient(i, &ln_psi, &psi, &p, &ln_p, &ln_q, &mut scratch, &mut grad);
            }
            (nll, grad)
        };
        let (nll, grad) = reduce_blocks(
            self.blocks(),
            per_block,
            (T::zero(), vec![T::zero(); expected]),
            |(a, mut ga), (b, gb)| {
                ga.iter_mut().zip(gb).for_each(|(x, y)| *x = *x + y);
                (a + b, ga)
            },
        );
        Ok((nll, grad))
    }

    fn check_params(&self, species: usize) -> Result<()> {
        if species != self.species {
            return Err(Error::Shape(format!(
                "parameters for {species} species, history has {}",
                self.species
            )));
        }
        Ok(())
    }

    /// Fills `scratch.log_lik[z]` with ln Pr(site data | z) and returns whether
    /// the site was surveyed at all.
    fn fill_state_terms<T: Scalar>(
        &self,
        i: usize,
        ln_p: &[T],
        ln_q: &[T],
        scratch: &mut StateScratch<T>,
    ) -> bool {
        let (det, n) = self.site(i);
        if n == 0 {
            return false;
        }
        // 0^0 = 1: a zero exponent contributes nothing even when p is 0 or 1
        let pow_term = |k: u32, ln: T| if k == 0 { T::zero() } else { T::lit(k as f64) * ln };
        let mut detected_mask = 0usize;
        for s in 0..self.species {
            let d = det[s];
            scratch.species_term[s] = pow_term(d, ln_p[s]) + pow_term(n - d, ln_q[s]);
            if d > 0 {
                detected_mask |= 1 << s;
            }
        }
        scratch.log_lik[0] = T::zero();
        for z in 1..scratch.log_lik.len() {
            let low = z.trailing_zeros() as usize;
            scratch.log_lik[z] = scratch.log_lik[z & (z - 1)] + scratch.species_term[low];
        }
        for (z, v) in scratch.log_lik.iter_mut().enumerate() {
            if z & detected_mask != detected_mask {
                *v = T::neg_infinity();
            }
        }
        true
    }

    fn site_log_lik<T: Scalar>(
        &self,
        i: usize,
        ln_psi: &[T],
        ln_p: &[T],
        ln_q: &[T],
        scratch: &mut StateScratch<T>,
    ) -> T {
        if !self.fill_state_terms(i, ln_p, ln_q, scratch) {
            return T::zero();
        }
        for (v, &lp) in scratch.log_lik.iter_mut().zip(ln_psi) {
            // a state with psi = 0 or an impossible detection drops out
            *v = if *v == T::neg_infinity() || lp == T::neg_infinity() {
                T::neg_infinity()
            } else {
                *v + lp
            };
        }
        log_sum_exp(&scratch.log_lik)
    }

    /// Adds the site's contribution to the NLL gradient; returns the site log-likelihood.
    #[allow(clippy::too_many_arguments)]
    fn site_gradient<T: Scalar>(
        &self,
        i: usize,
        ln_psi: &[T],
        psi: &[T],
        p: &[T],
        ln_p: &[T],
        ln_q: &[T],
        scratch: &mut StateScratch<T>,
        grad: &mut [T],
    ) -> T {
        if self.active[i] == 0 {
            return T::zero();
        }
        let ll = self.site_log_lik(i, ln_psi, ln_p, ln_q, scratch);
        let n_ratio = psi.len() - 1;
        let (det, n) = self.site(i);
        // posterior state weights
        for v in scratch.log_lik.iter_mut() {
            *v = (*v - ll).exp();
        }
        for k in 1..psi.len() {
            grad[k - 1] = grad[k - 1] - (scratch.log_lik[k] - psi[k]);
        }
        for s in 0..self.species {
            let occupied: T = scratch
                .log_lik
                .iter()
                .enumerate()
                .filter(|(z, _)| z >> s & 1 == 1)
                .map(|(_, &w)| w)
                .sum();
            let score = T::lit(det[s] as f64) - T::lit(n as f64) * p[s];
            grad[n_ratio + s] = grad[n_ratio + s] - score * occupied;
        }
        ll
    }
}

struct StateScratch<T> {
    log_lik: Vec<T>,
    species_term: Vec<T>,
}

impl<T: Scalar> StateScratch<T> {
    fn new(species: usize) -> Self {
        StateScratch {
            log_lik: vec![T::zero(); 1 << species],
            species_term: vec![T::zero(); species],
        }
    }
}

/// Evaluates `f` on every block (in parallel when there is more than one)
/// and folds the results in block order.
fn reduce_blocks<R, F, G>(blocks: usize, f: F, init: R, fold: G) -> R
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
    G: Fn(R, R) -> R,
{
    let parts: Vec<R> = if blocks > 1 {
        (0..blocks).into_par_iter().map(&f).collect()
    } else {
        (0..blocks).map(&f).collect()
    };
    parts.into_iter().fold(init, fold)
}

/// `-ln L` of `h` under `params`. Sites with no surveyed occasion contribute 0.
pub fn neg_log_likelihood<T: Scalar>(params: &OccupancyParams<T>, h: &DetectionHistory) -> Result<T> {
    SiteCounts::from_history(h)?.nll(params)
}

/// Analytic gradient of the negative log-likelihood in unconstrained coordinates.
pub fn nll_gradient<T: Scalar>(theta: &[T], h: &DetectionHistory) -> Result<Vec<T>> {
    Ok(SiteCounts::from_history(h)?.nll_and_gradient(theta)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survey::{SpeciesLabel, YearMonth};

    fn history(species: usize, sites: usize, occasions: usize, cells: Vec<Option<bool>>) -> DetectionHistory {
        DetectionHistory::new(
            (0..species).map(|s| SpeciesLabel::new(format!("sp{s}")).unwrap()).collect(),
            (0..sites).map(|i| format!("site{i}")).collect(),
            (0..occasions).map(|t| YearMonth::new(2017, 1).unwrap().offset(t)).collect(),
            cells,
        )
        .unwrap()
    }

    #[test]
    fn single_detection_half_probability() {
        let h = history(1, 1, 1, vec![Some(true)]);
        let params = OccupancyParams::new(vec![0.0f64, 1.0], vec![0.5]).unwrap();
        let nll = neg_log_likelihood(&params, &h).unwrap();
        assert!((nll - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn all_missing_is_zero() {
        let h = history(2, 3, 2, vec![None; 12]);
        let params = OccupancyParams::new(vec![0.1f64, 0.2, 0.3, 0.4], vec![0.3, 0.9]).unwrap();
        assert_eq!(neg_log_likelihood(&params, &h).unwrap(), 0.0);
        let g = nll_gradient(&[0.3f64, -0.1, 0.2, 1.0, -1.0], &h).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn detection_under_certain_absence_is_impossible() {
        let h = history(1, 1, 1, vec![Some(true)]);
        let params = OccupancyParams::new(vec![1.0f64, 0.0], vec![0.5]).unwrap();
        assert_eq!(neg_log_likelihood(&params, &h).unwrap(), f64::INFINITY);
    }

    #[test]
    fn perfect_detection_boundary() {
        // p = 1 with all detections: exponent of (1 - p) is zero
        let h = history(1, 1, 3, vec![Some(true); 3]);
        let params = OccupancyParams::new(vec![0.2f64, 0.8], vec![1.0]).unwrap();
        assert!((neg_log_likelihood(&params, &h).unwrap() + 0.8f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn species_count_mismatch() {
        let h = history(1, 1, 1, vec![Some(true)]);
        let params = OccupancyParams::new(vec![0.25f64; 4], vec![0.5, 0.5]).unwrap();
        assert!(neg_log_likelihood(&params, &h).is_err());
        assert!(nll_gradient(&[0.0f64; 3], &h).is_err());
    }

    #[test]
    fn f32_agrees_with_f64() {
        let cells = vec![Some(true), Some(false), None, Some(false), Some(true), None];
        let h = history(2, 1, 3, cells);
        let theta = [0.2, -0.4, 0.9, 0.1, -0.3];
        let theta32: Vec<f32> = theta.iter().map(|&v| v as f32).collect();
        let (a, ga) = SiteCounts::from_history(&h).unwrap().nll_and_gradient(&theta).unwrap();
        let (b, gb) = SiteCounts::from_history(&h).unwrap().nll_and_gradient(&theta32).unwrap();
        assert!((a - b as f64).abs() < 1e-5);
        for (x, y) in ga.iter().zip(gb) {
            assert!((x - y as f64).abs() < 1e-5);
        }
    }
}
