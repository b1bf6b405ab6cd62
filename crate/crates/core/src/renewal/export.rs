//! CSV exchange for forecasts, R summaries and filter diagnostics.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::parse_date;
use crate::series::SeriesKey;

use super::filter::{FilterReport, RtSummary, RT_LEVELS};
use super::forecast::{ForecastResult, FORECAST_LEVELS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub target: String,
    pub date: String,
    pub horizon: usize,
    pub quantile: f64,
    pub value: f64,
}

/// `target,date,horizon,quantile,value`, one row per target, day and level.
pub fn write_forecast_quantiles<W: Write>(result: &ForecastResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for t in &result.targets {
        for (i, (date, q)) in t.dates.iter().zip(&t.quantiles).enumerate() {
            for (level, value) in FORECAST_LEVELS.iter().zip(q) {
                w.serialize(QuantileRow {
                    target: t.key.to_string(),
                    date: date.to_string(),
                    horizon: i + 1,
                    quantile: *level,
                    value: *value,
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_forecast_quantiles<R: Read>(reader: R) -> Result<Vec<QuantileRow>> {
    csv::Reader::from_reader(reader).deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SampleRow {
    target: String,
    date: String,
    horizon: usize,
    sample: usize,
    value: u64,
}

/// `target,date,horizon,sample,value` with the first `max_samples` particles per day.
pub fn write_forecast_samples<W: Write>(result: &ForecastResult, max_samples: usize, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for t in &result.targets {
        for (i, (date, s)) in t.dates.iter().zip(&t.samples).enumerate() {
            for (j, v) in s.iter().take(max_samples).enumerate() {
                w.serialize(SampleRow {
                    target: t.key.to_string(),
                    date: date.to_string(),
                    horizon: i + 1,
                    sample: j,
                    value: *v,
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Forecast samples read back from CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleTable {
    /// Samples keyed by target and date, with the horizon.
    pub entries: BTreeMap<(SeriesKey, NaiveDate), (usize, Vec<f64>)>,
}

impl SampleTable {
    pub fn targets(&self) -> Vec<SeriesKey> {
        let mut keys: Vec<SeriesKey> = self.entries.keys().map(|(k, _)| *k).collect();
        keys.dedup();
        keys
    }

    /// The day before horizon 1 of `target`.
    pub fn origin(&self, target: SeriesKey) -> Option<NaiveDate> {
        self.entries
            .iter()
            .find(|((k, _), (h, _))| *k == target && *h == 1)
            .map(|((_, d), _)| *d - chrono::Duration::days(1))
    }
}

impl From<&ForecastResult> for SampleTable {
    fn from(result: &ForecastResult) -> Self {
        let mut entries = BTreeMap::new();
        for t in &result.targets {
            for (i, (date, s)) in t.dates.iter().zip(&t.samples).enumerate() {
                entries.insert((t.key, *date), (i + 1, s.iter().map(|&v| v as f64).collect()));
            }
        }
        SampleTable { entries }
    }
}

pub fn read_forecast_samples<R: Read>(reader: R) -> Result<SampleTable> {
    let mut table = SampleTable::default();
    for row in csv::Reader::from_reader(reader).deserialize() {
        let row: SampleRow = row?;
        let key: SeriesKey = row.target.parse()?;
        let date = parse_date(&row.date)?;
        let entry = table.entries.entry((key, date)).or_insert_with(|| (row.horizon, Vec::new()));
        if entry.0 != row.horizon {
            return Err(Error::Data(format!("{} {}: inconsistent horizons", row.target, row.date)));
        }
        entry.1.push(row.value as f64);
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtRow {
    pub date: String,
    /// `mean` or a quantile level.
    pub statistic: String,
    pub value: f64,
}

/// `date,statistic,value` with the mean and each level of [`RT_LEVELS`].
pub fn write_rt<W: Write>(rows: &[RtSummary], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        let date = r.date.to_string();
        w.serialize(RtRow { date: date.clone(), statistic: "mean".into(), value: r.mean })?;
        for (level, value) in RT_LEVELS.iter().zip(&r.quantiles) {
            w.serialize(RtRow { date: date.clone(), statistic: level.to_string(), value: *value })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_rt<R: Read>(reader: R) -> Result<Vec<RtSummary>> {
    let mut by_date: BTreeMap<NaiveDate, RtSummary> = BTreeMap::new();
    for row in csv::Reader::from_reader(reader).deserialize() {
        let row: RtRow = row?;
        let date = parse_date(&row.date)?;
        let entry = by_date.entry(date).or_insert(RtSummary { date, mean: f64::NAN, quantiles: [f64::NAN; 7] });
        if row.statistic == "mean" {
            entry.mean = row.value;
        } else {
            let level: f64 = row
                .statistic
                .parse()
                .map_err(|_| Error::Data(format!("unknown statistic {:?}", row.statistic)))?;
            let i = RT_LEVELS
                .iter()
                .position(|&l| l == level)
                .ok_or_else(|| Error::Data(format!("unexpected quantile level {level}")))?;
            entry.quantiles[i] = row.value;
        }
    }
    Ok(by_date.into_values().collect())
}

/// `date,ess`.
pub fn write_ess<W: Write>(report: &FilterReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "ess"])?;
    for (d, e) in report.dates.iter().zip(&report.ess) {
        w.write_record([d.to_string(), e.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
