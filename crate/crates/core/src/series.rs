//! Daily count series, data rounds, revision diffs and day-of-week effects.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pathogen {
    #[serde(rename = "SARSCoV2")]
    SarsCov2,
    Influenza,
    #[serde(rename = "RSV")]
    Rsv,
}

impl Pathogen {
    pub const ALL: [Pathogen; 3] = [Pathogen::SarsCov2, Pathogen::Influenza, Pathogen::Rsv];

    pub fn as_str(self) -> &'static str {
        match self {
            Pathogen::SarsCov2 => "SARSCoV2",
            Pathogen::Influenza => "Influenza",
            Pathogen::Rsv => "RSV",
        }
    }

    /// Pathogens for which only hospital admissions are modelled.
    pub fn is_single_stream(self) -> bool {
        !matches!(self, Pathogen::SarsCov2)
    }
}

impl fmt::Display for Pathogen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pathogen {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "sarscov2" | "covid" | "covid19" => Ok(Pathogen::SarsCov2),
            "influenza" | "flu" => Ok(Pathogen::Influenza),
            "rsv" => Ok(Pathogen::Rsv),
            _ => Err(Error::Parameter(format!("unknown pathogen {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Cases,
    Admissions,
}

impl Stream {
    pub fn as_str(self) -> &'static str {
        match self {
            Stream::Cases => "cases",
            Stream::Admissions => "admissions",
        }
    }
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stream {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cases" | "case" => Ok(Stream::Cases),
            "admissions" | "admission" | "hospitalisations" => Ok(Stream::Admissions),
            _ => Err(Error::Parameter(format!("unknown stream {s:?}"))),
        }
    }
}

/// Identifies one surveillance stream, e.g. `SARSCoV2_cases`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SeriesKey {
    pub pathogen: Pathogen,
    pub stream: Stream,
}

impl SeriesKey {
    pub fn new(pathogen: Pathogen, stream: Stream) -> Self {
        SeriesKey { pathogen, stream }
    }
}

impl fmt::Display for SeriesKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.pathogen, self.stream)
    }
}

impl FromStr for SeriesKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (p, st) = s
            .rsplit_once('_')
            .ok_or_else(|| Error::Parameter(format!("series key {s:?} is not <pathogen>_<stream>")))?;
        Ok(SeriesKey::new(p.parse()?, st.parse()?))
    }
}

/// Inclusive range of calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::Parameter(format!("empty date range {start}..{end}")));
        }
        Ok(DateRange { start, end })
    }

    pub fn len_days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        d >= self.start && d <= self.end
    }
}

/// Daily counts for one pathogen and stream over consecutive calendar days.
///
/// The last day is the origin date.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountSeries {
    pathogen: Pathogen,
    stream: Stream,
    start_date: NaiveDate,
    counts: Vec<u64>,
}

impl CountSeries {
    pub fn new(pathogen: Pathogen, stream: Stream, start_date: NaiveDate, counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Data("a count series needs at least one day".into()));
        }
        Ok(CountSeries { pathogen, stream, start_date, counts })
    }

    pub fn pathogen(&self) -> Pathogen {
        self.pathogen
    }

    pub fn stream(&self) -> Stream {
        self.stream
    }

    pub fn key(&self) -> SeriesKey {
        SeriesKey::new(self.pathogen, self.stream)
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    pub fn origin_date(&self) -> NaiveDate {
        self.start_date + Duration::days(self.counts.len() as i64 - 1)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn date_of(&self, index: usize) -> NaiveDate {
        self.start_date + Duration::days(index as i64)
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start_date).num_days();
        (offset >= 0 && (offset as usize) < self.counts.len()).then_some(offset as usize)
    }

    pub fn count_on(&self, date: NaiveDate) -> Option<u64> {
        self.index_of(date).map(|i| self.counts[i])
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Restrict to the days up to and including `origin`.
    pub fn truncate_to(&self, origin: NaiveDate) -> Result<CountSeries> {
        let end = self
            .index_of(origin)
            .ok_or_else(|| Error::Range(format!("{origin} is outside the series {}..{}", self.start_date, self.origin_date())))?;
        CountSeries::new(self.pathogen, self.stream, self.start_date, self.counts[..=end].to_vec())
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, u64)> + '_ {
        self.counts.iter().enumerate().map(|(i, &c)| (self.date_of(i), c))
    }
}

/// What to do with unit records dated outside the requested range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutOfRange {
    #[default]
    DropWithWarning,
    Reject,
}

/// Tally unit records (one ISO date per event) into daily counts over `range`.
pub fn ingest_unit_records<S: AsRef<str>>(
    rows: &[S],
    range: DateRange,
    pathogen: Pathogen,
    stream: Stream,
    policy: OutOfRange,
) -> Result<CountSeries> {
    let mut counts = vec![0u64; range.len_days()];
    let mut dropped = 0usize;
    for (row, raw) in rows.iter().enumerate() {
        let raw = raw.as_ref().trim();
        let date = NaiveDate::parse_from_str(raw, "%Y-%m-%d")
            .map_err(|_| Error::DateParse { row, value: raw.to_string() })?;
        if !range.contains(date) {
            match policy {
                OutOfRange::DropWithWarning => dropped += 1,
                OutOfRange::Reject => {
                    return Err(Error::Data(format!(
                        "row {row}: event date {date} outside {}..{}",
                        range.start, range.end
                    )))
                }
            }
            continue;
        }
        counts[(date - range.start).num_days() as usize] += 1;
    }
    if dropped > 0 {
        log::warn!(
            "{pathogen} {stream}: dropped {dropped} event(s) outside {}..{}",
            range.start,
            range.end
        );
    }
    CountSeries::new(pathogen, stream, range.start, counts)
}

/// Trailing `days` of the series (all of it when shorter), same origin date.
pub fn window_series(s: &CountSeries, days: usize) -> CountSeries {
    let days = days.max(1);
    let keep = days.min(s.len());
    let skip = s.len() - keep;
    CountSeries {
        pathogen: s.pathogen,
        stream: s.stream,
        start_date: s.date_of(skip),
        counts: s.counts[skip..].to_vec(),
    }
}

/// Multiplicative day-of-week effects, indexed Monday = 0 .. Sunday = 6.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayOfWeekEffects {
    pub omega: [f64; 7],
    pub window_weeks: usize,
    /// Set when the window held no counts and the all-ones default was used.
    pub degenerate: bool,
}

impl DayOfWeekEffects {
    pub fn ones() -> Self {
        DayOfWeekEffects { omega: [1.0; 7], window_weeks: 0, degenerate: false }
    }

    pub fn for_date(&self, date: NaiveDate) -> f64 {
        self.omega[weekday_index(date)]
    }
}

impl Default for DayOfWeekEffects {
    fn default() -> Self {
        Self::ones()
    }
}

/// Monday = 0 .. Sunday = 6.
pub fn weekday_index(date: NaiveDate) -> usize {
    date.weekday().num_days_from_monday() as usize
}

/// Estimate day-of-week multipliers from the whole weeks leading up to the origin date.
///
/// The window is the largest multiple of 7 days not exceeding
/// `min(len, 7 * max_weeks)`; the oldest partial week is discarded.
pub fn estimate_dow_effects(s: &CountSeries, max_weeks: usize) -> Result<DayOfWeekEffects> {
    if !(1..=16).contains(&max_weeks) {
        return Err(Error::Parameter(format!("max_weeks must be in 1..=16, got {max_weeks}")));
    }
    if s.len() < 7 {
        return Err(Error::InsufficientData(format!(
            "day-of-week estimation needs at least 7 days, series has {}",
            s.len()
        )));
    }
    let weeks = (s.len() / 7).min(max_weeks);
    let window = window_series(s, weeks * 7);
    let mut by_class = [0u64; 7];
    for (date, c) in window.iter() {
        by_class[weekday_index(date)] += c;
    }
    let total: u64 = by_class.iter().sum();
    if total == 0 {
        log::warn!("{}: no counts in the last {weeks} week(s); using unit day-of-week effects", s.key());
        return Ok(DayOfWeekEffects { omega: [1.0; 7], window_weeks: weeks, degenerate: true });
    }
    let mut omega = [0.0; 7];
    for (w, &c) in by_class.iter().enumerate() {
        omega[w] = 7.0 * c as f64 / total as f64;
    }
    Ok(DayOfWeekEffects { omega, window_weeks: weeks, degenerate: false })
}

/// One weekly data delivery.
#[derive(Debug, Clone, PartialEq)]
pub struct DataRound {
    round_index: u32,
    origin_date: NaiveDate,
    series: BTreeMap<SeriesKey, CountSeries>,
}

impl DataRound {
    pub fn new(round_index: u32, origin_date: NaiveDate, series: Vec<CountSeries>) -> Result<Self> {
        if round_index == 0 {
            return Err(Error::Parameter("round index starts at 1".into()));
        }
        let mut map = BTreeMap::new();
        for s in series {
            if s.origin_date() > origin_date {
                return Err(Error::Data(format!(
                    "{} ends {} after round origin {origin_date}",
                    s.key(),
                    s.origin_date()
                )));
            }
            let key = s.key();
            if map.insert(key, s).is_some() {
                return Err(Error::Data(format!("duplicate series {key} in round {round_index}")));
            }
        }
        Ok(DataRound { round_index, origin_date, series: map })
    }

    pub fn round_index(&self) -> u32 {
        self.round_index
    }

    pub fn origin_date(&self) -> NaiveDate {
        self.origin_date
    }

    pub fn get(&self, key: &SeriesKey) -> Option<&CountSeries> {
        self.series.get(key)
    }

    pub fn series(&self) -> impl Iterator<Item = &CountSeries> {
        self.series.values()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Revision {
    pub key: SeriesKey,
    pub date: NaiveDate,
    pub old: u64,
    pub new: u64,
}

/// Counts that changed between two rounds, for dates present in both.
///
/// Ordered by series key, then date.
pub fn diff_rounds(earlier: &DataRound, later: &DataRound) -> Vec<Revision> {
    let mut out = Vec::new();
    let mut shared = 0;
    for (key, old) in &earlier.series {
        let Some(new) = later.series.get(key) else { continue };
        shared += 1;
        for (date, old_count) in old.iter() {
            if let Some(new_count) = new.count_on(date) {
                if new_count != old_count {
                    out.push(Revision { key: *key, date, old: old_count, new: new_count });
                }
            }
        }
    }
    if shared == 0 {
        log::warn!(
            "rounds {} and {} share no series",
            earlier.round_index,
            later.round_index
        );
    }
    out
}
