//! Survey records and monthly detection histories.
//!
//! A detection history is an `S x I x T` array (species, site, occasion) where
//! each occasion is one calendar month in UTC. Cells hold `Some(true)` for a
//! detection, `Some(false)` for an active month without a detection of that
//! species, and `None` when the site was not surveyed in that month. Effort is
//! recorded per site-occasion, so a missing cell is missing for every species.

pub mod io;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use chrono::{DateTime, Datelike, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Species (or any class) name. Case-sensitive and free of field separators.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SpeciesLabel(String);

impl SpeciesLabel {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name.contains([',', '\n', '\r', '"']) {
            return Err(Error::InvalidLabel(name));
        }
        Ok(SpeciesLabel(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Parses a comma-separated list, trimming whitespace around each name.
    pub fn parse_list(list: &str) -> Result<Vec<SpeciesLabel>> {
        list.split(',').map(|s| SpeciesLabel::new(s.trim())).collect()
    }
}

impl TryFrom<String> for SpeciesLabel {
    type Error = Error;
    fn try_from(value: String) -> Result<Self> {
        SpeciesLabel::new(value)
    }
}

impl From<SpeciesLabel> for String {
    fn from(label: SpeciesLabel) -> String {
        label.0
    }
}

impl fmt::Display for SpeciesLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One labelled camera-trap photo.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageRecord {
    pub site_id: String,
    pub timestamp: DateTime<Utc>,
    pub label_true: SpeciesLabel,
    pub label_pred: Option<SpeciesLabel>,
}

impl ImageRecord {
    pub fn new(
        site_id: impl Into<String>,
        timestamp: DateTime<Utc>,
        label_true: SpeciesLabel,
        label_pred: Option<SpeciesLabel>,
    ) -> Result<Self> {
        let site_id = site_id.into();
        if site_id.is_empty() {
            return Err(Error::InvalidRecord("empty site_id".into()));
        }
        Ok(ImageRecord {
            site_id,
            timestamp,
            label_true,
            label_pred,
        })
    }

    pub fn label(&self, source: LabelSource) -> Option<&SpeciesLabel> {
        match source {
            LabelSource::True => Some(&self.label_true),
            LabelSource::Predicted => self.label_pred.as_ref(),
        }
    }

    pub fn month(&self) -> YearMonth {
        YearMonth::from_date(self.timestamp.date_naive())
    }
}

/// Period during which the cameras of a site were running (inclusive dates).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeploymentWindow {
    pub site_id: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DeploymentWindow {
    pub fn new(site_id: impl Into<String>, start: NaiveDate, end: NaiveDate) -> Result<Self> {
        let site_id = site_id.into();
        if site_id.is_empty() {
            return Err(Error::InvalidRecord("empty site_id in deployment".into()));
        }
        if start > end {
            return Err(Error::InvalidRecord(format!(
                "deployment for {site_id} starts {start} after it ends {end}"
            )));
        }
        Ok(DeploymentWindow { site_id, start, end })
    }

    /// Calendar months intersecting the window.
    pub fn months(&self) -> impl Iterator<Item = YearMonth> {
        YearMonth::range(
            YearMonth::from_date(self.start),
            YearMonth::from_date(self.end),
        )
    }
}

/// A calendar month; the sampling occasion of a detection history.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidRecord(format!("month {month} out of range")));
        }
        Ok(YearMonth { year, month })
    }

    pub fn from_date(date: NaiveDate) -> Self {
        YearMonth {
            year: date.year(),
            month: date.month(),
        }
    }

    fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    fn from_ordinal(ord: i64) -> Self {
        YearMonth {
            year: ord.div_euclid(12) as i32,
            month: ord.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn succ(self) -> Self {
        Self::from_ordinal(self.ordinal() + 1)
    }

    pub fn offset(self, months: usize) -> Self {
        Self::from_ordinal(self.ordinal() + months as i64)
    }

    /// Every month from `first` to `last`, inclusive.
    pub fn range(first: YearMonth, last: YearMonth) -> impl Iterator<Item = YearMonth> {
        (first.ordinal()..=last.ordinal()).map(Self::from_ordinal)
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month")
    }

    pub fn last_day(self) -> NaiveDate {
        self.succ().first_day().pred_opt().expect("valid date")
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl std::str::FromStr for YearMonth {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidRecord(format!("bad occasion {s:?}, expected YYYY-MM"));
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        YearMonth::new(y.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
    }
}

impl Serialize for YearMonth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which label of an [`ImageRecord`] drives detection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    True,
    Predicted,
}

/// Species x site x occasion detection array with its registries.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionHistory {
    species: Vec<SpeciesLabel>,
    sites: Vec<String>,
    occasions: Vec<YearMonth>,
    // row-major [s][i][t]
    cells: Vec<Option<bool>>,
}

impl DetectionHistory {
    pub fn new(
        species: Vec<SpeciesLabel>,
        sites: Vec<String>,
        occasions: Vec<YearMonth>,
        cells: Vec<Option<bool>>,
    ) -> Result<Self> {
        let (s, i, t) = (species.len(), sites.len(), occasions.len());
        if s == 0 || i == 0 || t == 0 {
            return Err(Error::Shape(format!(
                "history needs at least one species, site and occasion (got {s}x{i}x{t})"
            )));
        }
        if cells.len() != s * i * t {
            return Err(Error::Shape(format!(
                "{} cells for a {s}x{i}x{t} history",
                cells.len()
            )));
        }
        if occasions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Shape("occasions must be strictly increasing".into()));
        }
        if species.iter().collect::<BTreeSet<_>>().len() != s {
            return Err(Error::Shape("duplicate species label".into()));
        }
        if sites.iter().collect::<BTreeSet<_>>().len() != i {
            return Err(Error::Shape("duplicate site id".into()));
        }
        let h = DetectionHistory {
            species,
            sites,
            occasions,
            cells,
        };
        for site in 0..i {
            for occ in 0..t {
                let missing = h.get(0, site, occ).is_none();
                if (1..s).any(|sp| h.get(sp, site, occ).is_none() != missing) {
                    return Err(Error::Shape(format!(
                        "site {} occasion {} is missing for some species only",
                        h.sites[site], h.occasions[occ]
                    )));
                }
            }
        }
        Ok(h)
    }

    pub fn species(&self) -> &[SpeciesLabel] {
        &self.species
    }

    pub fn sites(&self) -> &[String] {
        &self.sites
    }

    pub fn occasions(&self) -> &[YearMonth] {
        &self.occasions
    }

    /// Row-major cells, species slowest and occasion fastest.
    pub fn cells(&self) -> &[Option<bool>] {
        &self.cells
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_occasions(&self) -> usize {
        self.occasions.len()
    }

    #[inline]
    fn index(&self, species: usize, site: usize, occasion: usize) -> usize {
        (species * self.sites.len() + site) * self.occasions.len() + occasion
    }

    #[inline]
    pub fn get(&self, species: usize, site: usize, occasion: usize) -> Option<bool> {
        self.cells[self.index(species, site, occasion)]
    }

    /// Whether site `site` was surveyed in occasion `occasion`.
    pub fn is_active(&self, site: usize, occasion: usize) -> bool {
        self.get(0, site, occasion).is_some()
    }

    /// Number of non-missing site-occasions.
    pub fn observed_cells(&self) -> usize {
        (0..self.n_sites())
            .map(|i| (0..self.n_occasions()).filter(|&t| self.is_active(i, t)).count())
            .sum()
    }

    /// Reorders species rows; `order[k]` is the current index of the new k-th species.
    pub fn permute_species(&self, order: &[usize]) -> Result<Self> {
        let s = self.n_species();
        let mut seen = vec![false; s];
        if order.len() != s || order.iter().any(|&k| k >= s || std::mem::replace(&mut seen[k], true)) {
            return Err(Error::Shape("species order is not a permutation".into()));
        }
        let block = self.n_sites() * self.n_occasions();
        let cells = order
            .iter()
            .flat_map(|&k| self.cells[k * block..(k + 1) * block].iter().copied())
            .collect();
        DetectionHistory::new(
            order.iter().map(|&k| self.species[k].clone()).collect(),
            self.sites.clone(),
            self.occasions.clone(),
            cells,
        )
    }

    /// Appends the sites of `other`, which must share species and occasions.
    pub fn concat_sites(&self, other: &DetectionHistory) -> Result<Self> {
        if self.species != other.species || self.occasions != other.occasions {
            return Err(Error::Shape("histories differ in species or occasions".into()));
        }
        let mut sites = self.sites.clone();
        sites.extend(other.sites.iter().cloned());
        let block_a = self.n_sites() * self.n_occasions();
        let block_b = other.n_sites() * other.n_occasions();
        let mut cells = Vec::with_capacity(self.cells.len() + other.cells.len());
        for s in 0..self.n_species() {
            cells.extend_from_slice(&self.cells[s * block_a..(s + 1) * block_a]);
            cells.extend_from_slice(&other.cells[s * block_b..(s + 1) * block_b]);
        }
        DetectionHistory::new(self.species.clone(), sites, self.occasions.clone(), cells)
    }
}

/// A built history plus what the builder had to ignore along the way.
#[derive(Clone, Debug)]
pub struct HistoryBuild {
    pub history: DetectionHistory,
    /// Filter species that never appear in the records (rows of 0 / missing).
    pub unknown_species: Vec<SpeciesLabel>,
    /// Records dated in a month when their site was not deployed; dropped.
    pub records_outside_effort: usize,
}

/// Aggregates image records into a monthly detection history.
///
/// Sites are every site seen in `records` or `deployments`, sorted. A site's
/// active months are the months intersecting its deployment windows; a site
/// without any window falls back to the span from its first to its last
/// record month. The occasion grid runs from the earliest to the latest
/// active month of any site.
pub fn build_detection_history(
    records: &[ImageRecord],
    deployments: Option<&[DeploymentWindow]>,
    species_filter: &[SpeciesLabel],
    label_source: LabelSource,
) -> Result<HistoryBuild> {
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    if species_filter.is_empty() {
        return Err(Error::InvalidOption("species filter is empty".into()));
    }
    let species_index: HashMap<&SpeciesLabel, usize> =
        species_filter.iter().enumerate().map(|(k, s)| (s, k)).collect();
    if species_index.len() != species_filter.len() {
        return Err(Error::InvalidOption("duplicate species in filter".into()));
    }
    if label_source == LabelSource::Predicted {
        if let Some(row) = records.iter().position(|r| r.label_pred.is_none()) {
            return Err(Error::MissingPrediction { row: row + 1 });
        }
    }

    let mut active: BTreeMap<&str, BTreeSet<YearMonth>> = BTreeMap::new();
    for w in deployments.unwrap_or_default() {
        active.entry(w.site_id.as_str()).or_default().extend(w.months());
    }
    let mut record_span: BTreeMap<&str, (YearMonth, YearMonth)> = BTreeMap::new();
    for r in records {
        let m = r.month();
        record_span
            .entry(r.site_id.as_str())
            .and_modify(|(lo, hi)| {
                *lo = (*lo).min(m);
                *hi = (*hi).max(m);
            })
            .or_insert((m, m));
    }
    for (site, (lo, hi)) in &record_span {
        active
            .entry(site)
            .or_insert_with(|| YearMonth::range(*lo, *hi).collect());
    }

    let first = active.values().filter_map(|m| m.first()).min().copied();
    let last = active.values().filter_map(|m| m.last()).max().copied();
    let (Some(first), Some(last)) = (first, last) else {
        return Err(Error::InvalidRecord("no active site-month".into()));
    };
    let occasions: Vec<YearMonth> = YearMonth::range(first, last).collect();
    let sites: Vec<String> = active.keys().map(|s| s.to_string()).collect();
    let (n_s, n_i, n_t) = (species_filter.len(), sites.len(), occasions.len());
    let occ_index = |m: YearMonth| (m.ordinal() - first.ordinal()) as usize;

    let mut cells = vec![None; n_s * n_i * n_t];
    for (i, months) in active.values().enumerate() {
        for &m in months {
            let t = occ_index(m);
            for s in 0..n_s {
                cells[(s * n_i + i) * n_t + t] = Some(false);
            }
        }
    }

    let mut seen = vec![false; n_s];
    let mut outside = 0;
    for r in records {
        // presence of a prediction was checked above
        let Some(label) = r.label(label_source) else { continue };
        let Some(&s) = species_index.get(label) else { continue };
        let i = sites.binary_search(&r.site_id).expect("site registered");
        let month = r.month();
        if month < first || month > last {
            outside += 1;
            continue;
        }
        let cell = &mut cells[(s * n_i + i) * n_t + occ_index(month)];
        match cell {
            None => outside += 1,
            Some(_) => {
                *cell = Some(true);
                seen[s] = true;
            }
        }
    }

    let unknown_species: Vec<SpeciesLabel> = species_filter
        .iter()
        .zip(&seen)
        .filter(|(_, &hit)| !hit)
        .map(|(s, _)| s.clone())
        .collect();
    for s in &unknown_species {
        log::warn!("species {s} has no detections in the records");
    }
    if outside > 0 {
        log::warn!("{outside} records fall outside deployment windows and were ignored");
    }

    Ok(HistoryBuild {
        history: DetectionHistory::new(species_filter.to_vec(), sites, occasions, cells)?,
        unknown_species,
        records_outside_effort: outside,
    })
}

/// Naive per-species tallies for one detection history.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpeciesSummary {
    pub species: SpeciesLabel,
    /// Site-occasions with a detection.
    pub detections: usize,
    /// Non-missing site-occasions.
    pub active_cells: usize,
    pub sites_detected: usize,
    /// Share of all sites with at least one detection.
    pub naive_occupancy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistorySummary {
    pub sites: usize,
    pub occasions: usize,
    pub active_site_occasions: usize,
    pub species: Vec<SpeciesSummary>,
}

pub fn history_summary(h: &DetectionHistory) -> HistorySummary {
    let active = h.observed_cells();
    let species = (0..h.n_species())
        .map(|s| {
            let mut detections = 0;
            let mut sites_detected = 0;
            for i in 0..h.n_sites() {
                let d = (0..h.n_occasions())
                    .filter(|&t| h.get(s, i, t) == Some(true))
                    .count();
                detections += d;
                sites_detected += usize::from(d > 0);
            }
            SpeciesSummary {
                species: h.species[s].clone(),
                detections,
                active_cells: active,
                sites_detected,
                naive_occupancy: sites_detected as f64 / h.n_sites() as f64,
            }
        })
        .collect();
    HistorySummary {
        sites: h.n_sites(),
        occasions: h.n_occasions(),
        active_site_occasions: active,
        species,
    }
}
