use cooccur::survey::io::{read_deployments_csv, read_images_csv, write_images_csv, HistoryJson};
use cooccur::survey::{
    build_detection_history, history_summary, DetectionHistory, ImageRecord, LabelSource, SpeciesLabel, YearMonth,
};
use cooccur::Error;
use proptest::prelude::*;

const IMAGES: &str = "\
site_id,timestamp,label_true,label_pred
A,2017-03-05T08:00:00Z,lynx,lynx
A,2017-03-20T21:15:00Z,lynx,lynx
A,2017-04-02T06:40:00Z,roe deer,roe deer
A,2017-05-30T23:59:59Z,chamois,chamois
B,2017-04-15T12:00:00Z,chamois,chamois
B,2017-06-01T03:00:00Z,roe deer,roe deer
B,2017-06-14T17:45:00Z,fox,fox
C,2017-05-03T22:10:00Z,lynx,lynx
C,2017-07-08T05:05:00Z,roe deer,roe deer
A,2017-04-30T23:30:00-02:00,lynx,lynx
";

const DEPLOYMENTS: &str = "\
site_id,start,end
A,2017-03-01,2017-05-31
B,2017-04-10,2017-06-15
";

fn filter() -> Vec<SpeciesLabel> {
    SpeciesLabel::parse_list("lynx,roe deer,chamois").unwrap()
}

fn fixture() -> (Vec<ImageRecord>, Vec<cooccur::survey::DeploymentWindow>) {
    (
        read_images_csv(IMAGES.as_bytes()).unwrap(),
        read_deployments_csv(DEPLOYMENTS.as_bytes()).unwrap(),
    )
}

/// Hand-derived grid, one string per (species, site): months March to July,
/// `1` detected, `0` surveyed without detection, `.` not surveyed.
const EXPECTED: [[&str; 3]; 3] = [
    ["101..", ".000.", "..100"],
    ["010..", ".001.", "..001"],
    ["001..", ".100.", "..000"],
];

fn decode(row: &str) -> Vec<Option<bool>> {
    row.chars()
        .map(|c| match c {
            '1' => Some(true),
            '0' => Some(false),
            _ => None,
        })
        .collect()
}

#[test]
fn fixture_history_matches_hand_derivation() {
    let (records, deployments) = fixture();
    let built = build_detection_history(&records, Some(&deployments), &filter(), LabelSource::True).unwrap();
    let h = &built.history;
    assert_eq!(h.sites(), ["A", "B", "C"]);
    let months: Vec<String> = h.occasions().iter().map(|m| m.to_string()).collect();
    assert_eq!(months, ["2017-03", "2017-04", "2017-05", "2017-06", "2017-07"]);
    for (s, rows) in EXPECTED.iter().enumerate() {
        for (i, row) in rows.iter().enumerate() {
            let got: Vec<Option<bool>> = (0..5).map(|t| h.get(s, i, t)).collect();
            assert_eq!(got, decode(row), "species {s} site {i}");
        }
    }
    assert!(built.unknown_species.is_empty());
    assert_eq!(built.records_outside_effort, 0);
}

#[test]
fn fixture_summary() {
    let (records, deployments) = fixture();
    let h = build_detection_history(&records, Some(&deployments), &filter(), LabelSource::True)
        .unwrap()
        .history;
    let summary = history_summary(&h);
    assert_eq!((summary.sites, summary.occasions, summary.active_site_occasions), (3, 5, 9));
    let got: Vec<(usize, usize, usize)> = summary
        .species
        .iter()
        .map(|s| (s.detections, s.active_cells, s.sites_detected))
        .collect();
    assert_eq!(got, [(3, 9, 2), (3, 9, 3), (2, 9, 2)]);
    let naive: Vec<f64> = summary.species.iter().map(|s| s.naive_occupancy).collect();
    assert_eq!(naive, [2.0 / 3.0, 1.0, 2.0 / 3.0]);
}

#[test]
fn fixture_json_round_trip() {
    let (records, deployments) = fixture();
    let h = build_detection_history(&records, Some(&deployments), &filter(), LabelSource::True)
        .unwrap()
        .history;
    let text = serde_json::to_string(&HistoryJson::from(&h)).unwrap();
    let back: HistoryJson = serde_json::from_str(&text).unwrap();
    assert_eq!(DetectionHistory::try_from(back).unwrap(), h);
}

#[test]
fn records_outside_deployment_are_counted_and_dropped() {
    let (mut records, deployments) = fixture();
    // B ran from 10 April to 15 June; July is on the grid only because of C
    let extra = "site_id,timestamp,label_true,label_pred\nB,2017-04-02T10:00:00Z,lynx,lynx\nB,2017-07-20T10:00:00Z,lynx,lynx\n";
    records.extend(read_images_csv(extra.as_bytes()).unwrap());
    let built = build_detection_history(&records, Some(&deployments), &filter(), LabelSource::True).unwrap();
    assert_eq!(built.records_outside_effort, 1);
    assert_eq!(built.history.get(0, 1, 1), Some(true));
    assert_eq!(built.history.get(0, 1, 4), None);
}

#[test]
fn unknown_filter_species_is_reported() {
    let (records, deployments) = fixture();
    let filter = SpeciesLabel::parse_list("lynx,wolf").unwrap();
    let built = build_detection_history(&records, Some(&deployments), &filter, LabelSource::True).unwrap();
    assert_eq!(built.unknown_species, [SpeciesLabel::new("wolf").unwrap()]);
    let h = &built.history;
    assert!((0..3).all(|i| (0..5).all(|t| h.get(1, i, t) != Some(true))));
}

#[test]
fn predicted_labels_require_predictions() {
    let csv = "site_id,timestamp,label_true,label_pred\nA,2017-03-05T08:00:00Z,lynx,lynx\nA,2017-03-06T08:00:00Z,lynx,\n";
    let records = read_images_csv(csv.as_bytes()).unwrap();
    let err = build_detection_history(&records, None, &filter(), LabelSource::Predicted).unwrap_err();
    assert!(matches!(err, Error::MissingPrediction { row: 2 }));
    assert!(build_detection_history(&records, None, &filter(), LabelSource::True).is_ok());
}

#[test]
fn empty_records_and_filters_are_rejected() {
    assert!(matches!(
        build_detection_history(&[], None, &filter(), LabelSource::True),
        Err(Error::NoRecords)
    ));
    let (records, _) = fixture();
    assert!(build_detection_history(&records, None, &[], LabelSource::True).is_err());
    let dup = vec![SpeciesLabel::new("lynx").unwrap(), SpeciesLabel::new("lynx").unwrap()];
    assert!(build_detection_history(&records, None, &dup, LabelSource::True).is_err());
}

#[test]
fn images_csv_round_trip() {
    let (records, _) = fixture();
    let mut buf = Vec::new();
    write_images_csv(&mut buf, &records).unwrap();
    assert_eq!(read_images_csv(buf.as_slice()).unwrap(), records);
}

fn arb_records() -> impl Strategy<Value = Vec<ImageRecord>> {
    let names = ["lynx", "roe deer", "chamois", "fox"];
    proptest::collection::vec((0usize..4, 0u32..120, 0usize..4, 0usize..4), 1..60).prop_map(move |rows| {
        rows.into_iter()
            .map(|(site, day, t, p)| {
                let date = chrono::NaiveDate::from_ymd_opt(2017, 3, 1).unwrap() + chrono::Days::new(day as u64);
                ImageRecord::new(
                    format!("S{site}"),
                    date.and_hms_opt(12, 0, 0).unwrap().and_utc(),
                    SpeciesLabel::new(names[t]).unwrap(),
                    Some(SpeciesLabel::new(names[p]).unwrap()),
                )
                .unwrap()
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn record_order_does_not_matter(records in arb_records(), seed in any::<u64>()) {
        let a = build_detection_history(&records, None, &filter(), LabelSource::True).unwrap().history;
        let mut shuffled = records.clone();
        // deterministic reorder driven by the seed
        shuffled.sort_by_key(|r| (r.timestamp.timestamp() as u64).wrapping_mul(seed | 1).rotate_left(17));
        let b = build_detection_history(&shuffled, None, &filter(), LabelSource::True).unwrap().history;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn duplicate_records_change_nothing(records in arb_records()) {
        let a = build_detection_history(&records, None, &filter(), LabelSource::True).unwrap().history;
        let mut doubled = records.clone();
        doubled.extend(records.iter().cloned());
        let b = build_detection_history(&doubled, None, &filter(), LabelSource::True).unwrap().history;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn true_and_predicted_agree_when_labels_agree(records in arb_records()) {
        let agreeing: Vec<ImageRecord> = records
            .into_iter()
            .map(|r| ImageRecord { label_pred: Some(r.label_true.clone()), ..r })
            .collect();
        let a = build_detection_history(&agreeing, None, &filter(), LabelSource::True).unwrap().history;
        let b = build_detection_history(&agreeing, None, &filter(), LabelSource::Predicted).unwrap().history;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn missingness_is_shared_across_species(records in arb_records()) {
        let h = build_detection_history(&records, None, &filter(), LabelSource::True).unwrap().history;
        for i in 0..h.n_sites() {
            for t in 0..h.n_occasions() {
                let missing: Vec<bool> = (0..h.n_species()).map(|s| h.get(s, i, t).is_none()).collect();
                prop_assert!(missing.iter().all(|&m| m == missing[0]));
            }
        }
        let first = h.occasions()[0];
        prop_assert!(first >= YearMonth::new(2017, 3).unwrap());
    }
}
