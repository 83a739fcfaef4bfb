//! Multispecies occupancy modelling for camera-trap surveys.
//!
//! The crate turns labelled image records into monthly detection histories,
//! fits a multispecies occupancy model by maximum likelihood, derives
//! marginal and conditional co-occurrence probabilities with confidence
//! intervals, and simulates how image-classifier errors propagate into those
//! estimates.
//!
//! Model code is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix it to `f64`, which is what the file formats and the CLI use.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod metrics;
pub mod occupancy;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod simulation;
pub mod survey;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Params = occupancy::OccupancyParams<f64>;
pub type Params32 = occupancy::OccupancyParams<f32>;
pub type Fit = estimation::FitResult<f64>;
pub type Fit32 = estimation::FitResult<f32>;
pub type Interval = estimation::IntervalEstimate<f64>;
pub type Experiment = simulation::ExperimentReport<f64>;
