//! Maximum-likelihood estimation and confidence intervals.

mod bfgs;
mod fit;
mod intervals;
mod linalg;

pub use fit::{fit, fit_counts, FitOptions, FitResult, BOUNDARY, DEFAULT_SEED};
pub use intervals::{derived_interval, derived_std_error, normal_critical_value, wald_interval, IntervalEstimate};
