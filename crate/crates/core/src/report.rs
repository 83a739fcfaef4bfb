//! Serialized fit results and plot-ready estimate tables.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{derived_interval, wald_interval, FitResult, IntervalEstimate};
use crate::occupancy::{state_label, theta_to_params, DerivedQuantity};
use crate::survey::SpeciesLabel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsDocument {
    /// Occupancy state probabilities keyed by state label (one digit per species).
    pub psi: BTreeMap<String, f64>,
    pub p: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub quantity: String,
    pub point: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// `fit-result.json` body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    pub species: Vec<SpeciesLabel>,
    pub theta_hat: Vec<f64>,
    pub params: ParamsDocument,
    pub nll: f64,
    /// Row-major, `null` when unavailable.
    pub vcov: Option<Vec<f64>>,
    pub converged: bool,
    pub n_starts_converged: usize,
    pub boundary_warning: bool,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    pub warnings: Vec<String>,
    pub level: f64,
    /// Detection probabilities with Wald intervals, then derived quantities
    /// with delta-method intervals.
    pub estimates: Vec<EstimateRow>,
}

fn row(quantity: String, point: f64, interval: Option<IntervalEstimate<f64>>) -> EstimateRow {
    EstimateRow {
        quantity,
        point,
        lower: interval.map(|i| i.lower),
        upper: interval.map(|i| i.upper),
    }
}

/// Point estimates and intervals for each detection probability and each
/// requested derived quantity. Intervals are omitted when the variance
/// matrix is unavailable.
pub fn estimate_rows(
    fit: &FitResult<f64>,
    species: &[SpeciesLabel],
    quantities: &[DerivedQuantity],
    level: f64,
) -> Result<Vec<EstimateRow>> {
    let mut rows = Vec::new();
    for (s, label) in species.iter().enumerate() {
        let interval = match wald_interval(fit, fit.p_coordinate(s), level) {
            Ok(i) => Some(i),
            Err(Error::VcovUnavailable) => None,
            Err(e) => return Err(e),
        };
        rows.push(row(format!("p({label})"), fit.params_hat.p()[s], interval));
    }
    for &q in quantities {
        let interval = match derived_interval(fit, q, level) {
            Ok(i) => Some(i),
            Err(Error::VcovUnavailable) => None,
            Err(e) => return Err(e),
        };
        rows.push(row(q.describe(species), q.evaluate(&fit.params_hat)?, interval));
    }
    Ok(rows)
}

impl FitDocument {
    pub fn new(
        fit: &FitResult<f64>,
        species: &[SpeciesLabel],
        quantities: &[DerivedQuantity],
        level: f64,
    ) -> Result<Self> {
        let n = species.len();
        if n != fit.n_species() {
            return Err(Error::Shape("species registry does not match the fit".into()));
        }
        let params = ParamsDocument {
            psi: fit
                .params_hat
                .psi()
                .iter()
                .enumerate()
                .map(|(z, &v)| (state_label(z, n), v))
                .collect(),
            p: species
                .iter()
                .zip(fit.params_hat.p())
                .map(|(l, &v)| (l.to_string(), v))
                .collect(),
        };
        Ok(FitDocument {
            species: species.to_vec(),
            theta_hat: fit.theta_hat.clone(),
            params,
            nll: fit.nll,
            vcov: fit.vcov.clone(),
            converged: fit.converged,
            n_starts_converged: fit.n_starts_converged,
            boundary_warning: fit.boundary_warning,
            grad_inf_norm: fit.grad_inf_norm,
            iterations: fit.iterations,
            warnings: fit.warnings.clone(),
            level,
            estimates: estimate_rows(fit, species, quantities, level)?,
        })
    }

    /// Rebuilds the fit needed to compute further intervals.
    pub fn to_fit(&self) -> Result<FitResult<f64>> {
        let n = self.species.len();
        let params_hat = theta_to_params(&self.theta_hat, n)?;
        if let Some(v) = &self.vcov {
            if v.len() != self.theta_hat.len().pow(2) {
                return Err(Error::Shape("vcov size does not match theta".into()));
            }
        }
        Ok(FitResult {
            theta_hat: self.theta_hat.clone(),
            params_hat,
            nll: self.nll,
            vcov: self.vcov.clone(),
            converged: self.converged,
            n_starts_converged: self.n_starts_converged,
            boundary_warning: self.boundary_warning,
            grad_inf_norm: self.grad_inf_norm,
            iterations: self.iterations,
            best_start: 0,
            warnings: self.warnings.clone(),
        })
    }
}

/// Writes `dataset,quantity,point,lower,upper` rows; missing bounds are empty.
pub fn write_estimates_csv<W: Write>(writer: W, tables: &[(&str, &[EstimateRow])]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["dataset", "quantity", "point", "lower", "upper"])?;
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (dataset, rows) in tables {
        for r in rows.iter() {
            w.write_record([
                dataset.to_string(),
                r.quantity.clone(),
                r.point.to_string(),
                fmt(r.lower),
                fmt(r.upper),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
