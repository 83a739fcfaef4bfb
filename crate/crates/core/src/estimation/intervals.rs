use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::fit::FitResult;
use crate::error::{Error, Result};
use crate::occupancy::DerivedQuantity;
use crate::scalar::{logistic, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntervalEstimate<T> {
    pub point: T,
    pub lower: T,
    pub upper: T,
    pub level: f64,
}

/// Two-sided standard normal critical value, e.g. 1.959964 for `level = 0.95`.
pub fn normal_critical_value(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidOption(format!("confidence level {level} not in (0, 1)")));
    }
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(std.inverse_cdf(0.5 + level / 2.0))
}

/// Wald interval for one coordinate of `theta`.
///
/// Detection coordinates are reported on the probability scale (the interval
/// is built on the logit scale and mapped through the logistic function);
/// occupancy log-ratio coordinates stay on the unconstrained scale.
pub fn wald_interval<T: Scalar>(fit: &FitResult<T>, coordinate: usize, level: f64) -> Result<IntervalEstimate<T>> {
    if coordinate >= fit.n_params() {
        return Err(Error::InvalidOption(format!(
            "coordinate {coordinate} out of range for {} parameters",
            fit.n_params()
        )));
    }
    let var = fit.variance(coordinate, coordinate).ok_or(Error::VcovUnavailable)?;
    let z = T::lit(normal_critical_value(level)?);
    let se = var.max(T::zero()).sqrt();
    let theta = fit.theta_hat[coordinate];
    let (lo, hi) = (theta - z * se, theta + z * se);
    let out = if coordinate >= fit.p_coordinate(0) {
        IntervalEstimate {
            point: logistic(theta),
            lower: logistic(lo),
            upper: logistic(hi),
            level,
        }
    } else {
        IntervalEstimate { point: theta, lower: lo, upper: hi, level }
    };
    Ok(out)
}

/// Delta-method interval for a derived probability, clipped to `[0, 1]`.
pub fn derived_interval<T: Scalar>(
    fit: &FitResult<T>,
    quantity: DerivedQuantity,
    level: f64,
) -> Result<IntervalEstimate<T>> {
    let z = T::lit(normal_critical_value(level)?);
    let point = quantity.evaluate(&fit.params_hat)?;
    let se = derived_std_error(fit, quantity)?;
    let clip = |v: T| v.max(T::zero()).min(T::one());
    Ok(IntervalEstimate {
        point,
        lower: clip(point - z * se),
        upper: clip(point + z * se),
        level,
    })
}

/// Standard error of a derived quantity by the delta method.
pub fn derived_std_error<T: Scalar>(fit: &FitResult<T>, quantity: DerivedQuantity) -> Result<T> {
    let vcov = fit.vcov.as_ref().ok_or(Error::VcovUnavailable)?;
    let g = quantity.theta_gradient(&fit.params_hat)?;
    let n = g.len();
    let var = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .fold(T::zero(), |acc, (i, j)| acc + g[i] * vcov[i * n + j] * g[j]);
    Ok(var.max(T::zero()).sqrt())
}
