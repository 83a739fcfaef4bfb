use rand::Rng;
use rayon::prelude::*;

use super::draw_category;
use crate::error::{Error, Result};
use crate::metrics::Misclassification;
use crate::rng::{stream, Purpose};
use crate::survey::ImageRecord;

/// Fills `label_pred` of every record with a label drawn from the row of its
/// true label. Record `k` uses random stream `k`; order and every other field
/// are preserved.
pub fn corrupt_labels(records: &[ImageRecord], probs: &Misclassification, seed: u64) -> Result<Vec<ImageRecord>> {
    let rows: Vec<&[f64]> = records
        .iter()
        .map(|r| {
            probs
                .row(&r.label_true)
                .ok_or_else(|| Error::MissingRow(r.label_true.to_string()))
        })
        .collect::<Result<_>>()?;
    Ok(records
        .par_iter()
        .zip(rows)
        .enumerate()
        .map(|(k, (r, row))| {
            let mut rng = stream(seed, Purpose::CorruptRecord, k as u64);
            let col = draw_category(row.iter().copied(), rng.random::<f64>());
            ImageRecord {
                label_pred: Some(probs.columns[col].clone()),
                ..r.clone()
            }
        })
        .collect())
}
