//! CSV exchange for posterior draws and trend summaries.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::parse_date;

use super::fit::PosteriorSamples;
use super::summary::{TrendSummary, SUMMARY_LEVELS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorRow {
    pub draw: usize,
    pub chain: usize,
    pub parameter: String,
    pub value: f64,
}

/// Long-format draws: `draw,chain,parameter,value`.
pub fn write_posterior<W: Write>(samples: &PosteriorSamples, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (i, (d, &chain)) in samples.draws.iter().zip(&samples.chain).enumerate() {
        let mut row = |parameter: String, value: f64| w.serialize(PosteriorRow { draw: i, chain, parameter, value });
        for (j, b) in d.b.iter().enumerate() {
            row(format!("b[{j}]"), *b)?;
        }
        row("tau".into(), d.tau)?;
        row("k".into(), d.k)?;
        if let Some(lw) = &d.log_omega {
            for (j, v) in lw.iter().enumerate() {
                row(format!("log_omega[{j}]"), *v)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Draws grouped by parameter name, in file order.
pub fn read_posterior<R: Read>(reader: R) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for row in csv::Reader::from_reader(reader).deserialize() {
        let row: PosteriorRow = row?;
        out.entry(row.parameter).or_default().push(row.value);
    }
    if out.is_empty() {
        return Err(Error::Data("posterior export has no rows".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub date: String,
    pub quantity: String,
    /// Empty for point summaries.
    pub quantile: Option<f64>,
    pub value: f64,
}

impl SummaryRow {
    pub fn date(&self) -> Result<NaiveDate> {
        parse_date(&self.date)
    }
}

/// Long-format summary: `date,quantity,quantile,value`.
///
/// Quantities: `expected`, `expected_dow`, `growth_rate` (with quantiles),
/// `p_growth`, `doubling_time` (signed; omitted where the median rate is
/// zero) and `stable` (0 or 1).
pub fn write_trend_summary<W: Write>(summary: &TrendSummary, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for d in &summary.days {
        let date = d.date.to_string();
        let mut row = |quantity: &str, quantile: Option<f64>, value: f64| {
            w.serialize(SummaryRow { date: date.clone(), quantity: quantity.into(), quantile, value })
        };
        for (q, v) in SUMMARY_LEVELS.iter().zip(&d.expected) {
            row("expected", Some(*q), *v)?;
        }
        if let Some(e) = &d.expected_dow {
            for (q, v) in SUMMARY_LEVELS.iter().zip(e) {
                row("expected_dow", Some(*q), *v)?;
            }
        }
        for (q, v) in SUMMARY_LEVELS.iter().zip(&d.growth_rate) {
            row("growth_rate", Some(*q), *v)?;
        }
        row("p_growth", None, d.p_growth)?;
        if let Some(t) = d.doubling_time {
            row("doubling_time", None, t)?;
        }
        row("stable", None, if d.stable { 1.0 } else { 0.0 })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trend_summary<R: Read>(reader: R) -> Result<Vec<SummaryRow>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}
