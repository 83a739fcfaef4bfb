//! Multispecies occupancy model with a saturated multivariate Bernoulli
//! distribution over latent presence states and species-specific detection.

mod derived;
mod likelihood;
mod params;

pub use derived::{conditional_occupancy, marginal_occupancy, DerivedQuantity};
pub use likelihood::{neg_log_likelihood, nll_gradient, SiteCounts};
pub use params::{params_to_theta, state_label, theta_len, theta_to_params, OccupancyParams, MAX_SPECIES};
