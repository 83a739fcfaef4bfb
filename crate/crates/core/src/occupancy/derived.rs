//! Marginal and conditional occupancy probabilities.

use std::fmt;

use serde::Serialize;

use super::params::OccupancyParams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn marginal_occupancy<T: Scalar>(params: &OccupancyParams<T>, species: usize) -> Result<T> {
    check_index(params, species)?;
    Ok(sum_states(params.psi(), |z| z >> species & 1 == 1))
}

/// `Pr(Z_target = 1 | Z_given = present)`.
pub fn conditional_occupancy<T: Scalar>(
    params: &OccupancyParams<T>,
    target: usize,
    given: usize,
    present: bool,
) -> Result<T> {
    check_index(params, target)?;
    check_index(params, given)?;
    if target == given {
        return Err(Error::InvalidParams("target and conditioning species coincide".into()));
    }
    let cond = |z: usize| (z >> given & 1 == 1) == present;
    let denom = sum_states(params.psi(), cond);
    if denom <= T::zero() {
        return Err(Error::NullConditioningEvent);
    }
    let num = sum_states(params.psi(), |z| cond(z) && z >> target & 1 == 1);
    Ok(num / denom)
}

fn check_index<T: Scalar>(params: &OccupancyParams<T>, index: usize) -> Result<()> {
    if index >= params.n_species() {
        return Err(Error::IndexOutOfRange {
            index,
            species: params.n_species(),
        });
    }
    Ok(())
}

fn sum_states<T: Scalar>(psi: &[T], keep: impl Fn(usize) -> bool) -> T {
    psi.iter()
        .enumerate()
        .filter(|(z, _)| keep(*z))
        .map(|(_, &v)| v)
        .fold(T::zero(), |a, b| a + b)
}

/// A probability derived from the occupancy state distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DerivedQuantity {
    Marginal {
        species: usize,
    },
    Conditional {
        target: usize,
        given: usize,
        present: bool,
    },
}

impl DerivedQuantity {
    pub fn evaluate<T: Scalar>(&self, params: &OccupancyParams<T>) -> Result<T> {
        match *self {
            DerivedQuantity::Marginal { species } => marginal_occupancy(params, species),
            DerivedQuantity::Conditional {
                target,
                given,
                present,
            } => conditional_occupancy(params, target, given, present),
        }
    }

    /// Gradient with respect to the unconstrained coordinates at `params`.
    ///
    /// With `psi = softmax(eta)`, `d psi_z / d eta_k = psi_z (1[z = k] - psi_k)`,
    /// so a state sum `A` has `dA / d eta_k = psi_k (1[k in A] - A)`. Detection
    /// coordinates do not enter.
    pub fn theta_gradient<T: Scalar>(&self, params: &OccupancyParams<T>) -> Result<Vec<T>> {
        let psi = params.psi();
        let mut grad = vec![T::zero(); psi.len() - 1 + params.n_species()];
        let indicator = |b: bool| if b { T::one() } else { T::zero() };
        match *self {
            DerivedQuantity::Marginal { species } => {
                let m = marginal_occupancy(params, species)?;
                for k in 1..psi.len() {
                    grad[k - 1] = psi[k] * (indicator(k >> species & 1 == 1) - m);
                }
            }
            DerivedQuantity::Conditional {
                target,
                given,
                present,
            } => {
                let c = conditional_occupancy(params, target, given, present)?;
                let in_b = |z: usize| (z >> given & 1 == 1) == present;
                let in_a = |z: usize| in_b(z) && z >> target & 1 == 1;
                let a = sum_states(psi, in_a);
                let b = sum_states(psi, in_b);
                for k in 1..psi.len() {
                    let da = psi[k] * (indicator(in_a(k)) - a);
                    let db = psi[k] * (indicator(in_b(k)) - b);
                    // d(a/b) = (da - c db) / b
                    grad[k - 1] = (da - c * db) / b;
                }
            }
        }
        Ok(grad)
    }

    /// Human-readable name using species labels.
    pub fn describe(&self, species: &[impl fmt::Display]) -> String {
        match *self {
            DerivedQuantity::Marginal { species: s } => format!("marginal({})", species[s]),
            DerivedQuantity::Conditional {
                target,
                given,
                present,
            } => format!(
                "conditional({}|{}={})",
                species[target],
                species[given],
                if present { "present" } else { "absent" }
            ),
        }
    }

    /// Every marginal, then every ordered pair conditional on presence and absence.
    pub fn all(species: usize) -> Vec<DerivedQuantity> {
        let mut out: Vec<_> = (0..species)
            .map(|s| DerivedQuantity::Marginal { species: s })
            .collect();
        for target in 0..species {
            out.extend(Self::conditionals_of(target, species));
        }
        out
    }

    /// Conditionals of `target` on each other species being present or absent.
    pub fn conditionals_of(target: usize, species: usize) -> Vec<DerivedQuantity> {
        (0..species)
            .filter(|&g| g != target)
            .flat_map(|given| {
                [true, false].map(|present| DerivedQuantity::Conditional {
                    target,
                    given,
                    present,
                })
            })
            .collect()
    }
}
