mod common;

use std::collections::HashMap;

use cooccur::metrics::{confusion_matrix, precision_recall, row_normalize, ConfusionMatrix};
use cooccur::survey::{ImageRecord, SpeciesLabel};
use cooccur::Error;
use proptest::prelude::*;
use rand::Rng;

fn label(s: &str) -> SpeciesLabel {
    SpeciesLabel::new(s).unwrap()
}

fn labels(names: &[&str]) -> Vec<SpeciesLabel> {
    names.iter().map(|s| label(s)).collect()
}

fn record(t: &str, p: &str) -> ImageRecord {
    ImageRecord::new("A", "2017-03-01T00:00:00Z".parse().unwrap(), label(t), Some(label(p))).unwrap()
}

#[test]
fn fifty_records_match_hash_tally() {
    let names = ["lynx", "roe deer", "chamois", "fox", "human"];
    let mut rng = common::rng(11);
    let records: Vec<ImageRecord> = (0..50)
        .map(|_| record(names[rng.random_range(0..5)], names[rng.random_range(0..5)]))
        .collect();
    let cm = confusion_matrix(&records).unwrap();

    let mut tally: HashMap<(String, String), u64> = HashMap::new();
    for r in &records {
        *tally
            .entry((r.label_true.to_string(), r.label_pred.as_ref().unwrap().to_string()))
            .or_default() += 1;
    }
    let mut seen: Vec<String> = tally.keys().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
    seen.sort();
    seen.dedup();
    assert_eq!(cm.labels().iter().map(|l| l.to_string()).collect::<Vec<_>>(), seen);
    for (a, la) in cm.labels().iter().enumerate() {
        for (b, lb) in cm.labels().iter().enumerate() {
            let want = tally.get(&(la.to_string(), lb.to_string())).copied().unwrap_or(0);
            assert_eq!(cm.counts()[a][b], want);
        }
    }
    assert_eq!(cm.total(), 50);
}

#[test]
fn two_record_example() {
    let cm = confusion_matrix(&[record("lynx", "lynx"), record("lynx", "fox")]).unwrap();
    assert_eq!(cm.labels(), labels(&["fox", "lynx"]));
    assert_eq!(cm.counts(), [vec![0, 0], vec![1, 1]]);
}

#[test]
fn missing_prediction_names_record() {
    let mut records = vec![record("lynx", "lynx"), record("fox", "fox")];
    records[1].label_pred = None;
    assert!(matches!(confusion_matrix(&records), Err(Error::MissingPrediction { row: 2 })));
    assert!(matches!(confusion_matrix(&[]), Err(Error::NoRecords)));
}

#[test]
fn identity_confusion_gives_perfect_metrics() {
    let cm = ConfusionMatrix::new(labels(&["a", "b", "c"]), vec![vec![4, 0, 0], vec![0, 7, 0], vec![0, 0, 1]]).unwrap();
    let report = precision_recall(&cm);
    assert_eq!(report.accuracy, 1.0);
    for c in &report.classes {
        assert_eq!((c.precision, c.recall), (Some(1.0), Some(1.0)));
    }
}

#[test]
fn training_lynx_recall() {
    // 95 of 100 lynx images recognised
    let cm = ConfusionMatrix::new(labels(&["lynx", "other"]), vec![vec![95, 5], vec![14, 886]]).unwrap();
    let lynx = precision_recall(&cm).class("lynx").unwrap().clone();
    assert_eq!(lynx.recall, Some(0.95));
    assert_eq!((lynx.tp, lynx.fn_, lynx.fp), (95, 5, 14));
    assert_eq!(lynx.precision, Some(95.0 / 109.0));
}

#[test]
fn transfer_chamois_recall() {
    // 8 of 100 chamois images recognised, most taken for roe deer
    let cm = ConfusionMatrix::new(
        labels(&["chamois", "roe deer"]),
        vec![vec![8, 92], vec![2, 98]],
    )
    .unwrap();
    let report = precision_recall(&cm);
    assert_eq!(report.class("chamois").unwrap().recall, Some(0.08));
    assert_eq!(report.class("chamois").unwrap().precision, Some(0.8));
    assert_eq!(report.accuracy, 106.0 / 200.0);
}

#[test]
fn undefined_rates_are_none() {
    // "red deer" is never predicted and never present
    let cm = ConfusionMatrix::new(labels(&["fox", "red deer"]), vec![vec![3, 0], vec![0, 0]]).unwrap();
    let rd = precision_recall(&cm).class("red deer").unwrap().clone();
    assert_eq!((rd.precision, rd.recall), (None, None));
    let json = serde_json::to_value(&rd).unwrap();
    assert!(json["precision"].is_null() && json["recall"].is_null());
    assert_eq!(json["fn"], 0);
}

#[test]
fn figure_like_fixture_normalizes_by_hand_division() {
    // rows: true badger, chamois, fox, lynx, roe deer
    let counts = vec![
        vec![41, 0, 6, 1, 2],
        vec![0, 3, 1, 0, 33],
        vec![5, 0, 120, 2, 3],
        vec![0, 0, 4, 77, 0],
        vec![1, 2, 0, 0, 97],
    ];
    let names = ["badger", "chamois", "fox", "lynx", "roe deer"];
    let cm = ConfusionMatrix::new(labels(&names), counts).unwrap();
    let probs = row_normalize(&cm).unwrap();
    let want = [
        [41.0 / 50.0, 0.0, 6.0 / 50.0, 1.0 / 50.0, 2.0 / 50.0],
        [0.0, 3.0 / 37.0, 1.0 / 37.0, 0.0, 33.0 / 37.0],
        [5.0 / 130.0, 0.0, 120.0 / 130.0, 2.0 / 130.0, 3.0 / 130.0],
        [0.0, 0.0, 4.0 / 81.0, 77.0 / 81.0, 0.0],
        [1.0 / 100.0, 2.0 / 100.0, 0.0, 0.0, 97.0 / 100.0],
    ];
    for (row, w) in probs.probs.iter().zip(want) {
        assert_eq!(row.as_slice(), w.as_slice());
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn zero_rows_are_dropped() {
    let cm = ConfusionMatrix::new(labels(&["a", "b"]), vec![vec![1, 3], vec![0, 0]]).unwrap();
    let probs = row_normalize(&cm).unwrap();
    assert_eq!(probs.probs, [vec![0.25, 0.75]]);
    assert_eq!(probs.dropped, labels(&["b"]));
    let empty = ConfusionMatrix::new(labels(&["a"]), vec![vec![0]]).unwrap();
    assert!(matches!(row_normalize(&empty), Err(Error::EmptyConfusion)));
}

#[test]
fn confusion_csv_round_trip() {
    let cm = ConfusionMatrix::new(labels(&["lynx", "roe deer"]), vec![vec![5, 1], vec![0, 9]]).unwrap();
    let mut buf = Vec::new();
    cm.write_csv(&mut buf).unwrap();
    assert_eq!(ConfusionMatrix::read_csv(buf.as_slice()).unwrap(), cm);
}

fn arb_matrix() -> impl Strategy<Value = Vec<Vec<u64>>> {
    (1usize..6).prop_flat_map(|k| proptest::collection::vec(proptest::collection::vec(0u64..40, k), k))
}

proptest! {
    #[test]
    fn weighted_recall_is_accuracy(counts in arb_matrix()) {
        let k = counts.len();
        let names: Vec<String> = (0..k).map(|c| format!("c{c}")).collect();
        let cm = ConfusionMatrix::new(names.iter().map(|n| label(n)).collect(), counts.clone()).unwrap();
        let report = precision_recall(&cm);
        let total: u64 = counts.iter().flatten().sum();
        prop_assume!(total > 0);
        let diag: u64 = (0..k).map(|c| counts[c][c]).sum();
        prop_assert_eq!(report.accuracy, diag as f64 / total as f64);
        let weighted: f64 = report
            .classes
            .iter()
            .filter_map(|c| c.recall.map(|r| r * c.support as f64 / total as f64))
            .sum();
        prop_assert!((weighted - report.accuracy).abs() < 1e-12);
        for (c, m) in report.classes.iter().enumerate() {
            prop_assert_eq!(m.support, counts[c].iter().sum::<u64>());
        }
    }

    #[test]
    fn permutation_equivariance(counts in arb_matrix(), rot in 0usize..6) {
        let k = counts.len();
        let order: Vec<usize> = (0..k).map(|c| (c + rot) % k).collect();
        let names: Vec<SpeciesLabel> = (0..k).map(|c| label(&format!("c{c}"))).collect();
        let permuted_counts: Vec<Vec<u64>> = order.iter().map(|&a| order.iter().map(|&b| counts[a][b]).collect()).collect();
        let a = precision_recall(&ConfusionMatrix::new(names.clone(), counts).unwrap());
        let b = precision_recall(
            &ConfusionMatrix::new(order.iter().map(|&c| names[c].clone()).collect(), permuted_counts).unwrap(),
        );
        prop_assert_eq!(a.accuracy, b.accuracy);
        for m in &a.classes {
            prop_assert_eq!(Some(m), b.class(m.label.as_str()));
        }
    }
}
