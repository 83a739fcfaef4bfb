use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{logistic, logit, Scalar};

/// Largest species count whose `2^S` latent states are enumerated.
pub const MAX_SPECIES: usize = 20;

/// Length of the unconstrained coordinate vector for `species` species:
/// `2^S - 1` log-ratios for the occupancy states, then one logit per species.
pub fn theta_len(species: usize) -> usize {
    (1usize << species) - 1 + species
}

pub(crate) fn check_species(species: usize) -> Result<()> {
    if species == 0 {
        return Err(Error::InvalidParams("need at least one species".into()));
    }
    if species > MAX_SPECIES {
        return Err(Error::StateSpaceTooLarge {
            species,
            max: MAX_SPECIES,
        });
    }
    Ok(())
}

/// Occupancy state probabilities and per-species detection probabilities.
///
/// State `z` is a bit set: bit `s` is set when species `s` occupies the site,
/// so species 0 is the least significant bit. `psi[z]` sums to one over all
/// `2^S` states.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OccupancyParams<T> {
    psi: Vec<T>,
    p: Vec<T>,
}

impl<T: Scalar> OccupancyParams<T> {
    /// Validates a parameter set. Boundary values (0 or 1) are accepted so
    /// degenerate generating models can be expressed; the unconstrained
    /// mapping requires interior values.
    pub fn new(psi: Vec<T>, p: Vec<T>) -> Result<Self> {
        let s = p.len();
        check_species(s)?;
        if psi.len() != 1 << s {
            return Err(Error::InvalidParams(format!(
                "{} occupancy states for {s} species, expected {}",
                psi.len(),
                1usize << s
            )));
        }
        let in_unit = |v: &T| v.is_finite() && *v >= T::zero() && *v <= T::one();
        if !psi.iter().all(in_unit) || !p.iter().all(in_unit) {
            return Err(Error::InvalidParams("probabilities must lie in [0, 1]".into()));
        }
        let sum: T = psi.iter().copied().sum();
        let tol = T::lit(1e-9).max(T::epsilon() * T::lit(64.0));
        if (sum - T::one()).abs() > tol {
            return Err(Error::InvalidParams(format!(
                "occupancy states sum to {:?}, not 1",
                sum
            )));
        }
        Ok(OccupancyParams { psi, p })
    }

    /// Occupancy with species occurring independently with the given marginals.
    pub fn independent(marginals: &[T], p: Vec<T>) -> Result<Self> {
        let s = marginals.len();
        check_species(s)?;
        let psi = (0..1usize << s)
            .map(|z| {
                (0..s)
                    .map(|k| {
                        if z >> k & 1 == 1 {
                            marginals[k]
                        } else {
                            T::one() - marginals[k]
                        }
                    })
                    .fold(T::one(), |a, b| a * b)
            })
            .collect();
        Self::new(psi, p)
    }

    pub fn n_species(&self) -> usize {
        self.p.len()
    }

    pub fn n_states(&self) -> usize {
        self.psi.len()
    }

    pub fn psi(&self) -> &[T] {
        &self.psi
    }

    pub fn p(&self) -> &[T] {
        &self.p
    }

    pub fn is_interior(&self) -> bool {
        self.psi
            .iter()
            .chain(&self.p)
            .all(|&v| v > T::zero() && v < T::one())
    }

    /// Same model with species reordered; `order[k]` is the current index of
    /// the new k-th species.
    pub fn permute_species(&self, order: &[usize]) -> Result<Self> {
        let s = self.n_species();
        if order.len() != s {
            return Err(Error::InvalidParams("permutation length".into()));
        }
        let mut psi = vec![T::zero(); self.n_states()];
        for (z_new, slot) in psi.iter_mut().enumerate() {
            let z_old = order
                .iter()
                .enumerate()
                .fold(0usize, |acc, (k, &old)| acc | ((z_new >> k & 1) << old));
            *slot = self.psi[z_old];
        }
        let p = order.iter().map(|&k| self.p[k]).collect();
        Self::new(psi, p)
    }

    pub fn to_theta(&self) -> Result<Vec<T>> {
        params_to_theta(self)
    }

    pub fn from_theta(theta: &[T], species: usize) -> Result<Self> {
        theta_to_params(theta, species)
    }
}

/// Label of latent state `z`: one character per species in registry order,
/// `1` for present. For two species, state 1 is `"10"` (first species only).
pub fn state_label(z: usize, species: usize) -> String {
    (0..species)
        .map(|k| if z >> k & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// `ln psi` for every state from the log-ratio coordinates (reference state 0).
pub(crate) fn log_psi<T: Scalar>(ratios: &[T]) -> Vec<T> {
    let max = ratios.iter().copied().fold(T::zero(), T::max);
    let denom = (-max).exp() + ratios.iter().map(|&r| (r - max).exp()).sum::<T>();
    let log_norm = max + denom.ln();
    std::iter::once(-log_norm)
        .chain(ratios.iter().map(|&r| r - log_norm))
        .collect()
}

/// Maps unconstrained coordinates to parameters: softmax over
/// `[0, theta_1, .., theta_{2^S-1}]` for `psi`, logistic for each `p`.
pub fn theta_to_params<T: Scalar>(theta: &[T], species: usize) -> Result<OccupancyParams<T>> {
    check_species(species)?;
    let expected = theta_len(species);
    if theta.len() != expected {
        return Err(Error::ThetaLength {
            expected,
            got: theta.len(),
        });
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams("theta has non-finite entries".into()));
    }
    let n_ratio = (1 << species) - 1;
    let psi: Vec<T> = log_psi(&theta[..n_ratio]).into_iter().map(T::exp).collect();
    let p = theta[n_ratio..].iter().map(|&x| logistic(x)).collect();
    Ok(OccupancyParams { psi, p })
}

/// Inverse of [`theta_to_params`]; requires interior parameters.
pub fn params_to_theta<T: Scalar>(params: &OccupancyParams<T>) -> Result<Vec<T>> {
    if !params.is_interior() {
        return Err(Error::InvalidParams(
            "boundary parameters have no unconstrained representation".into(),
        ));
    }
    let ref_ln = params.psi[0].ln();
    Ok(params.psi[1..]
        .iter()
        .map(|&v| v.ln() - ref_ln)
        .chain(params.p.iter().map(|&v| logit(v)))
        .collect())
}
