//! Confusion matrices and per-class precision / recall.
//!
//! Rows are true labels, columns predicted labels. Rates whose denominator
//! is zero are `None` rather than `0` or `NaN`.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::survey::{ImageRecord, SpeciesLabel};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    labels: Vec<SpeciesLabel>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    /// `counts[a][b]` is the number of items of true class `a` predicted as `b`.
    pub fn new(labels: Vec<SpeciesLabel>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = labels.len();
        if k == 0 {
            return Err(Error::Shape("confusion matrix needs at least one label".into()));
        }
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::Shape(format!("confusion counts are not {k}x{k}")));
        }
        if labels.iter().collect::<BTreeSet<_>>().len() != k {
            return Err(Error::Shape("duplicate label in confusion matrix".into()));
        }
        Ok(ConfusionMatrix { labels, counts })
    }

    pub fn labels(&self) -> &[SpeciesLabel] {
        &self.labels
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn index_of(&self, label: &SpeciesLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn col_sum(&self, class: usize) -> u64 {
        self.counts.iter().map(|r| r[class]).sum()
    }

    /// Writes the matrix with a header row and a header column of labels.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["true/predicted".to_string()];
        header.extend(self.labels.iter().map(|l| l.to_string()));
        w.write_record(&header)?;
        for (label, row) in self.labels.iter().zip(&self.counts) {
            let mut rec = vec![label.to_string()];
            rec.extend(row.iter().map(|c| c.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format produced by [`ConfusionMatrix::write_csv`]. Row and
    /// column labels must list the same classes in the same order.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = rdr.records();
        let header = rows.next().ok_or(Error::EmptyConfusion)??;
        let labels = header
            .iter()
            .skip(1)
            .map(SpeciesLabel::new)
            .collect::<Result<Vec<_>>>()?;
        let mut counts = Vec::with_capacity(labels.len());
        for (k, row) in rows.enumerate() {
            let row = row?;
            let name = row.get(0).unwrap_or_default();
            if labels.get(k).map(|l| l.as_str()) != Some(name) {
                return Err(Error::Shape(format!(
                    "confusion row {} is labelled {name:?}, expected the column order",
                    k + 1
                )));
            }
            let values = row
                .iter()
                .skip(1)
                .map(|v| {
                    v.parse::<u64>()
                        .map_err(|_| Error::Shape(format!("bad count {v:?} in row {name}")))
                })
                .collect::<Result<Vec<_>>>()?;
            counts.push(values);
        }
        ConfusionMatrix::new(labels, counts)
    }
}

/// Tallies true vs predicted labels. The label set is the sorted union of both.
pub fn confusion_matrix(records: &[ImageRecord]) -> Result<ConfusionMatrix> {
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    let mut pairs = Vec::with_capacity(records.len());
    for (row, r) in records.iter().enumerate() {
        let pred = r.label_pred.as_ref().ok_or(Error::MissingPrediction { row: row + 1 })?;
        pairs.push((&r.label_true, pred));
    }
    let labels: Vec<SpeciesLabel> = pairs
        .iter()
        .flat_map(|(t, p)| [*t, *p])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .cloned()
        .collect();
    let k = labels.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (t, p) in pairs {
        let a = labels.binary_search(t).expect("label registered");
        let b = labels.binary_search(p).expect("label registered");
        counts[a][b] += 1;
    }
    ConfusionMatrix::new(labels, counts)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub label: SpeciesLabel,
    /// Number of items whose true label is this class.
    pub support: u64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub total: u64,
}

impl MetricsReport {
    pub fn class(&self, label: &str) -> Option<&ClassMetrics> {
        self.classes.iter().find(|c| c.label.as_str() == label)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn precision_recall(cm: &ConfusionMatrix) -> MetricsReport {
    let total = cm.total();
    let mut correct = 0;
    let classes = (0..cm.labels.len())
        .map(|c| {
            let tp = cm.counts[c][c];
            correct += tp;
            let support = cm.row_sum(c);
            let fn_ = support - tp;
            let fp = cm.col_sum(c) - tp;
            ClassMetrics {
                label: cm.labels[c].clone(),
                support,
                tp,
                fp,
                fn_,
                precision: ratio(tp, tp + fp),
                recall: ratio(tp, tp + fn_),
            }
        })
        .collect();
    MetricsReport {
        classes,
        accuracy: ratio(correct, total).unwrap_or(0.0),
        total,
    }
}

/// Row-stochastic misclassification probabilities derived from a confusion matrix.
///
/// `probs[r]` is the distribution of the predicted label (over `columns`) for
/// an item whose true label is `rows[r]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Misclassification {
    pub rows: Vec<SpeciesLabel>,
    pub columns: Vec<SpeciesLabel>,
    pub probs: Vec<Vec<f64>>,
    /// True labels with no items, which carry no information and were dropped.
    pub dropped: Vec<SpeciesLabel>,
}

impl Misclassification {
    pub fn row(&self, label: &SpeciesLabel) -> Option<&[f64]> {
        self.rows
            .iter()
            .position(|l| l == label)
            .map(|k| self.probs[k].as_slice())
    }

    /// Probabilities that leave every label unchanged.
    pub fn identity(labels: &[SpeciesLabel]) -> Self {
        let k = labels.len();
        Misclassification {
            rows: labels.to_vec(),
            columns: labels.to_vec(),
            probs: (0..k)
                .map(|a| (0..k).map(|b| if a == b { 1.0 } else { 0.0 }).collect())
                .collect(),
            dropped: Vec::new(),
        }
    }
}

pub fn row_normalize(cm: &ConfusionMatrix) -> Result<Misclassification> {
    let mut rows = Vec::new();
    let mut probs = Vec::new();
    let mut dropped = Vec::new();
    for (label, counts) in cm.labels.iter().zip(&cm.counts) {
        let sum: u64 = counts.iter().sum();
        if sum == 0 {
            log::warn!("confusion row {label} is empty and was dropped");
            dropped.push(label.clone());
            continue;
        }
        rows.push(label.clone());
        probs.push(counts.iter().map(|&c| c as f64 / sum as f64).collect());
    }
    if rows.is_empty() {
        return Err(Error::EmptyConfusion);
    }
    Ok(Misclassification {
        rows,
        columns: cm.labels.clone(),
        probs,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn l(s: &str) -> SpeciesLabel {
        SpeciesLabel::new(s).unwrap()
    }

    fn rec(t: &str, p: Option<&str>) -> ImageRecord {
        let ts = Utc.with_ymd_and_hms(2017, 3, 1, 0, 0, 0).unwrap();
        ImageRecord::new("A", ts, l(t), p.map(l)).unwrap()
    }

    #[test]
    fn correct_predictions_give_diagonal() {
        let recs = [rec("lynx", Some("lynx")), rec("fox", Some("fox")), rec("fox", Some("fox"))];
        let cm = confusion_matrix(&recs).unwrap();
        assert_eq!(cm.labels(), &[l("fox"), l("lynx")]);
        assert_eq!(cm.counts(), &[vec![2, 0], vec![0, 1]]);
    }

    #[test]
    fn one_right_one_wrong() {
        let cm = confusion_matrix(&[rec("lynx", Some("lynx")), rec("lynx", Some("fox"))]).unwrap();
        let lynx = cm.index_of(&l("lynx")).unwrap();
        let fox = cm.index_of(&l("fox")).unwrap();
        assert_eq!(cm.counts()[lynx][lynx], 1);
        assert_eq!(cm.counts()[lynx][fox], 1);
        assert_eq!(cm.row_sum(fox), 0);
    }

    #[test]
    fn missing_prediction_reports_row() {
        let err = confusion_matrix(&[rec("lynx", Some("lynx")), rec("fox", None)]).unwrap_err();
        assert!(matches!(err, Error::MissingPrediction { row: 2 }));
        assert!(matches!(confusion_matrix(&[]), Err(Error::NoRecords)));
    }

    #[test]
    fn identity_metrics_are_one() {
        let cm = ConfusionMatrix::new(vec![l("a"), l("b")], vec![vec![5, 0], vec![0, 3]]).unwrap();
        let m = precision_recall(&cm);
        assert_eq!(m.accuracy, 1.0);
        assert!(m.classes.iter().all(|c| c.precision == Some(1.0) && c.recall == Some(1.0)));
    }

    #[test]
    fn zero_denominators_are_undefined() {
        // class b never occurs and is never predicted
        let cm = ConfusionMatrix::new(vec![l("a"), l("b")], vec![vec![4, 0], vec![0, 0]]).unwrap();
        let m = precision_recall(&cm);
        let b = m.class("b").unwrap();
        assert_eq!((b.precision, b.recall), (None, None));
        let json = serde_json::to_string(b).unwrap();
        assert!(json.contains(r#""precision":null"#));
    }

    #[test]
    fn normalize_rows() {
        let cm = ConfusionMatrix::new(vec![l("a"), l("b")], vec![vec![1, 3], vec![0, 0]]).unwrap();
        let p = row_normalize(&cm).unwrap();
        assert_eq!(p.probs, vec![vec![0.25, 0.75]]);
        assert_eq!(p.dropped, vec![l("b")]);
        let empty = ConfusionMatrix::new(vec![l("a")], vec![vec![0]]).unwrap();
        assert!(matches!(row_normalize(&empty), Err(Error::EmptyConfusion)));
        let diag = ConfusionMatrix::new(vec![l("a"), l("b")], vec![vec![7, 0], vec![0, 2]]).unwrap();
        assert_eq!(row_normalize(&diag).unwrap().probs, Misclassification::identity(cm.labels()).probs);
    }

    #[test]
    fn csv_round_trip() {
        let cm = ConfusionMatrix::new(
            vec![l("chamois"), l("roe deer")],
            vec![vec![8, 92], vec![1, 9]],
        )
        .unwrap();
        let mut buf = Vec::new();
        cm.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "true/predicted,chamois,roe deer\nchamois,8,92\nroe deer,1,9\n");
        assert_eq!(ConfusionMatrix::read_csv(text.as_bytes()).unwrap(), cm);
    }
}
