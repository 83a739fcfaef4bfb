use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bfgs::{inf_norm, minimize, BfgsOutcome};
use super::linalg::spd_inverse;
use crate::error::{Error, Result};
use crate::occupancy::{theta_len, theta_to_params, OccupancyParams, SiteCounts};
use crate::rng::{stream, Purpose};
use crate::scalar::Scalar;
use crate::survey::DetectionHistory;

/// Seed used when the caller does not pick one.
pub const DEFAULT_SEED: u64 = 2021;

/// Fitted probabilities outside `[BOUNDARY, 1 - BOUNDARY]` raise a boundary warning.
pub const BOUNDARY: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Random starts in addition to the start at `theta = 0`.
    pub n_starts: usize,
    pub seed: u64,
    pub grad_tol: f64,
    pub max_iter: usize,
    pub fd_hessian_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            n_starts: 5,
            seed: DEFAULT_SEED,
            grad_tol: 1e-6,
            max_iter: 500,
            fd_hessian_step: 1e-4,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 || self.max_iter == 0 {
            return Err(Error::InvalidOption("n_starts and max_iter must be positive".into()));
        }
        if !(self.grad_tol > 0.0) || !(self.fd_hessian_step > 0.0) {
            return Err(Error::InvalidOption(
                "grad_tol and fd_hessian_step must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of a maximum-likelihood fit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult<T> {
    pub theta_hat: Vec<T>,
    pub params_hat: OccupancyParams<T>,
    pub nll: T,
    /// Row-major inverse observed information over `theta`; `None` when the
    /// Hessian was not positive definite.
    pub vcov: Option<Vec<T>>,
    pub converged: bool,
    pub n_starts_converged: usize,
    pub boundary_warning: bool,
    pub grad_inf_norm: T,
    pub iterations: usize,
    /// Index of the winning start (0 is the start at `theta = 0`).
    pub best_start: usize,
    pub warnings: Vec<String>,
}

impl<T: Scalar> FitResult<T> {
    pub fn n_species(&self) -> usize {
        self.params_hat.n_species()
    }

    pub fn n_params(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn variance(&self, i: usize, j: usize) -> Option<T> {
        let n = self.n_params();
        self.vcov.as_ref().map(|v| v[i * n + j])
    }

    /// Index in `theta` of the detection logit of `species`.
    pub fn p_coordinate(&self, species: usize) -> usize {
        (1 << self.n_species()) - 1 + species
    }
}

/// Maximum-likelihood fit of the occupancy model to `h`.
///
/// Runs BFGS from `theta = 0` and from `opts.n_starts` random starts with
/// coordinates uniform on `(-1, 1)`, keeps the converged run with the lowest
/// NLL (ties go to the lower start index), and estimates the variance matrix
/// by inverting a central-difference Hessian of the analytic gradient.
pub fn fit<T: Scalar>(h: &DetectionHistory, opts: &FitOptions) -> Result<FitResult<T>> {
    fit_counts(&SiteCounts::from_history(h)?, opts)
}

pub fn fit_counts<T: Scalar>(counts: &SiteCounts, opts: &FitOptions) -> Result<FitResult<T>> {
    opts.validate()?;
    if counts.n_observed_sites() == 0 {
        return Err(Error::EmptyHistory);
    }
    let species = counts.n_species();
    let dim = theta_len(species);
    let grad_tol = T::lit(opts.grad_tol);
    let objective = |theta: &[T]| counts.nll_and_gradient(theta);

    let starts: Vec<Vec<T>> = (0..=opts.n_starts)
        .map(|k| {
            if k == 0 {
                vec![T::zero(); dim]
            } else {
                let mut rng = stream(opts.seed, Purpose::FitStart, k as u64);
                (0..dim).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect()
            }
        })
        .collect();
    let runs: Vec<BfgsOutcome<T>> = starts
        .into_par_iter()
        .map(|x0| minimize(objective, x0, grad_tol, opts.max_iter))
        .collect::<Result<_>>()?;

    let n_converged = runs.iter().filter(|r| r.converged).count();
    let best = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.converged && r.f.is_finite())
        .fold(None::<(usize, &BfgsOutcome<T>)>, |acc, (k, r)| match acc {
            Some((_, b)) if b.f <= r.f => acc,
            _ => Some((k, r)),
        });
    let Some((best_start, run)) = best else {
        let closest = runs
            .iter()
            .min_by(|a, b| inf_norm(&a.grad).partial_cmp(&inf_norm(&b.grad)).unwrap_or(std::cmp::Ordering::Equal))
            .expect("at least one start");
        return Err(Error::NoConvergence {
            best_nll: runs.iter().map(|r| r.f.as_f64()).fold(f64::INFINITY, f64::min),
            best_grad_norm: inf_norm(&closest.grad).as_f64(),
            iterations: closest.iterations,
        });
    };

    let params_hat = theta_to_params(&run.x, species)?;
    let mut warnings = Vec::new();
    let lo = T::lit(BOUNDARY);
    let hi = T::one() - lo;
    let boundary_warning = params_hat
        .psi()
        .iter()
        .chain(params_hat.p())
        .any(|&v| v < lo || v > hi);
    if boundary_warning {
        warnings.push(format!(
            "estimate on the boundary: a fitted probability lies outside [{BOUNDARY}, {}]",
            1.0 - BOUNDARY
        ));
    }

    let hessian = fd_hessian(counts, &run.x, T::lit(opts.fd_hessian_step))?;
    let vcov = spd_inverse(&hessian, dim);
    if vcov.is_none() {
        warnings.push("Hessian is not positive definite; variance matrix unavailable".into());
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    Ok(FitResult {
        theta_hat: run.x.clone(),
        params_hat,
        nll: run.f,
        vcov,
        converged: true,
        n_starts_converged: n_converged,
        boundary_warning,
        grad_inf_norm: inf_norm(&run.grad),
        iterations: run.iterations,
        best_start,
        warnings,
    })
}

/// Symmetrized central-difference Jacobian of the analytic gradient.
pub(crate) fn fd_hessian<T: Scalar>(counts: &SiteCounts, theta: &[T], step: T) -> Result<Vec<T>> {
    let n = theta.len();
    let columns: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut up = theta.to_vec();
            let mut dn = theta.to_vec();
            up[j] = up[j] + step;
            dn[j] = dn[j] - step;
            let (_, gu) = counts.nll_and_gradient(&up)?;
            let (_, gd) = counts.nll_and_gradient(&dn)?;
            Ok(gu.iter().zip(&gd).map(|(&a, &b)| (a - b) / (step + step)).collect())
        })
        .collect::<Result<_>>()?;
    let mut h = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] = (columns[j][i] + columns[i][j]) * T::lit(0.5);
        }
    }
    Ok(h)
}
