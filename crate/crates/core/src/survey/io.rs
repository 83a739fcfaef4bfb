//! CSV and JSON file formats for survey data.
//!
//! * `images.csv`: `site_id,timestamp,label_true,label_pred` (`label_pred` may be empty)
//! * `deployments.csv`: `site_id,start,end`
//! * history JSON: registries, `shape = [S, I, T]` and row-major `y` with
//!   missing cells as `null`.

use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{DeploymentWindow, DetectionHistory, ImageRecord, SpeciesLabel, YearMonth};
use crate::error::{Error, Result};

const TIMESTAMP_FORMATS: &[&str] = &[
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
];

/// Parses an ISO-8601 timestamp. Offsets are converted to UTC; naive
/// timestamps and bare dates are taken as UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .or_else(|| parse_date(s).and_then(|d| d.and_hms_opt(0, 0, 0)))
        .map(|naive| naive.and_utc())
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

#[derive(Deserialize, Serialize)]
struct ImageRow {
    site_id: String,
    timestamp: String,
    label_true: String,
    #[serde(default)]
    label_pred: Option<String>,
}

#[derive(Deserialize, Serialize)]
struct DeploymentRow {
    site_id: String,
    start: String,
    end: String,
}

/// Reads `images.csv`. Row numbers in errors count data rows from 1.
pub fn read_images_csv<R: Read>(reader: R) -> Result<Vec<ImageRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (k, row) in rdr.deserialize::<ImageRow>().enumerate() {
        let row_no = k + 1;
        let row = row?;
        let timestamp = parse_timestamp(&row.timestamp).ok_or(Error::MalformedTimestamp {
            row: row_no,
            value: row.timestamp.clone(),
        })?;
        let label_pred = match row.label_pred.as_deref() {
            None | Some("") => None,
            Some(p) => Some(SpeciesLabel::new(p)?),
        };
        let record = ImageRecord::new(row.site_id, timestamp, SpeciesLabel::new(row.label_true)?, label_pred)
            .map_err(|e| Error::InvalidRecord(format!("row {row_no}: {e}")))?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_images_csv<W: Write>(writer: W, records: &[ImageRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(ImageRow {
            site_id: r.site_id.clone(),
            timestamp: format_timestamp(&r.timestamp),
            label_true: r.label_true.to_string(),
            label_pred: Some(r.label_pred.as_ref().map(|l| l.to_string()).unwrap_or_default()),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_deployments_csv<R: Read>(reader: R) -> Result<Vec<DeploymentWindow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (k, row) in rdr.deserialize::<DeploymentRow>().enumerate() {
        let row_no = k + 1;
        let row = row?;
        let date = |v: &str| {
            parse_date(v).ok_or(Error::MalformedDate {
                row: row_no,
                value: v.to_string(),
            })
        };
        let w = DeploymentWindow::new(row.site_id, date(&row.start)?, date(&row.end)?)
            .map_err(|e| Error::InvalidRecord(format!("row {row_no}: {e}")))?;
        out.push(w);
    }
    Ok(out)
}

pub fn write_deployments_csv<W: Write>(writer: W, windows: &[DeploymentWindow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for d in windows {
        w.serialize(DeploymentRow {
            site_id: d.site_id.clone(),
            start: d.start.to_string(),
            end: d.end.to_string(),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Serialized form of a [`DetectionHistory`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HistoryJson {
    pub species: Vec<SpeciesLabel>,
    pub sites: Vec<String>,
    pub occasions: Vec<YearMonth>,
    pub shape: [usize; 3],
    pub y: Vec<Option<u8>>,
}

impl From<&DetectionHistory> for HistoryJson {
    fn from(h: &DetectionHistory) -> Self {
        HistoryJson {
            species: h.species.clone(),
            sites: h.sites.clone(),
            occasions: h.occasions.clone(),
            shape: [h.n_species(), h.n_sites(), h.n_occasions()],
            y: h.cells.iter().map(|c| c.map(u8::from)).collect(),
        }
    }
}

impl TryFrom<HistoryJson> for DetectionHistory {
    type Error = Error;
    fn try_from(j: HistoryJson) -> Result<Self> {
        if j.shape != [j.species.len(), j.sites.len(), j.occasions.len()] {
            return Err(Error::Shape(format!("shape {:?} disagrees with registries", j.shape)));
        }
        let cells = j
            .y
            .into_iter()
            .map(|v| match v {
                None => Ok(None),
                Some(0) => Ok(Some(false)),
                Some(1) => Ok(Some(true)),
                Some(other) => Err(Error::Shape(format!("cell value {other} is not 0, 1 or null"))),
            })
            .collect::<Result<Vec<_>>>()?;
        DetectionHistory::new(j.species, j.sites, j.occasions, cells)
    }
}
