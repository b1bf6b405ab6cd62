//! CSV readers and writers for count data and revision tables.
//!
//! Two input layouts are accepted and told apart by the header row:
//! unit records (`event_date`, one row per event) and pre-aggregated daily
//! counts (`date,count`). Counts are always written in the aggregated layout.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::series::{
    ingest_unit_records, CountSeries, DataRound, DateRange, OutOfRange, Pathogen, Revision, SeriesKey,
    Stream,
};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

pub fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT)
        .map_err(|_| Error::Data(format!("cannot parse date {s:?} (expected YYYY-MM-DD)")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountFormat {
    UnitRecords,
    Aggregated,
}

/// Read a count series from any reader, auto-detecting the layout.
///
/// For unit records the range defaults to first..last event date. For the
/// aggregated layout missing days are filled with zero.
pub fn read_counts<R: Read>(
    reader: R,
    pathogen: Pathogen,
    stream: Stream,
    range: Option<DateRange>,
) -> Result<CountSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let format = match (col("event_date"), col("date"), col("count")) {
        (Some(_), _, _) => CountFormat::UnitRecords,
        (None, Some(_), Some(_)) => CountFormat::Aggregated,
        _ => {
            return Err(Error::Data(format!(
                "unrecognised header {:?}; expected `event_date` or `date,count`",
                headers.iter().collect::<Vec<_>>()
            )))
        }
    };

    match format {
        CountFormat::UnitRecords => {
            let idx = col("event_date").unwrap();
            let mut rows = Vec::new();
            for rec in rdr.records() {
                rows.push(rec?.get(idx).unwrap_or("").to_string());
            }
            let range = match range {
                Some(r) => r,
                None => {
                    let mut dates = Vec::with_capacity(rows.len());
                    for (row, raw) in rows.iter().enumerate() {
                        dates.push(
                            NaiveDate::parse_from_str(raw.trim(), DATE_FORMAT)
                                .map_err(|_| Error::DateParse { row, value: raw.clone() })?,
                        );
                    }
                    let (Some(lo), Some(hi)) = (dates.iter().min(), dates.iter().max()) else {
                        return Err(Error::Data("no event rows and no date range given".into()));
                    };
                    DateRange::new(*lo, *hi)?
                }
            };
            ingest_unit_records(&rows, range, pathogen, stream, OutOfRange::DropWithWarning)
        }
        CountFormat::Aggregated => {
            let (di, ci) = (col("date").unwrap(), col("count").unwrap());
            let mut by_date = BTreeMap::new();
            for (row, rec) in rdr.records().enumerate() {
                let rec = rec?;
                let raw_date = rec.get(di).unwrap_or("");
                let date = NaiveDate::parse_from_str(raw_date, DATE_FORMAT)
                    .map_err(|_| Error::DateParse { row, value: raw_date.to_string() })?;
                let raw_count = rec.get(ci).unwrap_or("");
                let count: u64 = raw_count
                    .parse()
                    .map_err(|_| Error::Data(format!("row {row}: count {raw_count:?} is not a non-negative integer")))?;
                if by_date.insert(date, count).is_some() {
                    return Err(Error::Data(format!("row {row}: duplicate date {date}")));
                }
            }
            let range = match range {
                Some(r) => r,
                None => {
                    let (Some(lo), Some(hi)) = (by_date.keys().next(), by_date.keys().next_back()) else {
                        return Err(Error::Data("no count rows".into()));
                    };
                    DateRange::new(*lo, *hi)?
                }
            };
            let mut counts = vec![0u64; range.len_days()];
            for (date, c) in by_date {
                if range.contains(date) {
                    counts[(date - range.start).num_days() as usize] = c;
                }
            }
            CountSeries::new(pathogen, stream, range.start, counts)
        }
    }
}

pub fn read_counts_file(path: &Path, pathogen: Pathogen, stream: Stream) -> Result<CountSeries> {
    let f = File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    read_counts(f, pathogen, stream, None)
}

pub fn write_counts<W: Write>(series: &CountSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "count"])?;
    for (date, c) in series.iter() {
        w.write_record([date.format(DATE_FORMAT).to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_counts_file(series: &CountSeries, path: &Path) -> Result<()> {
    write_counts(series, File::create(path)?)
}

/// Load a round directory holding `<Pathogen>_<stream>.csv` files.
///
/// The round origin is the latest origin of its series.
pub fn read_round_dir(dir: &Path, round_index: u32) -> Result<DataRound> {
    let mut series = Vec::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::Data(format!("{}: {e}", dir.display())))?
        .collect::<std::result::Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
        let Ok(key) = stem.parse::<SeriesKey>() else {
            log::warn!("skipping {}: name is not <pathogen>_<stream>.csv", path.display());
            continue;
        };
        series.push(read_counts_file(&path, key.pathogen, key.stream)?);
    }
    let origin = series
        .iter()
        .map(|s| s.origin_date())
        .max()
        .ok_or_else(|| Error::Data(format!("{}: no series files", dir.display())))?;
    DataRound::new(round_index, origin, series)
}

pub fn write_revisions<W: Write>(revisions: &[Revision], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["key", "date", "old", "new"])?;
    for r in revisions {
        w.write_record([
            r.key.to_string(),
            r.date.format(DATE_FORMAT).to_string(),
            r.old.to_string(),
            r.new.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_revisions<R: Read>(reader: R) -> Result<Vec<Revision>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<u64> {
            field(i).parse().map_err(|_| Error::Data(format!("bad count {:?}", field(i))))
        };
        out.push(Revision { key: field(0).parse()?, date: parse_date(field(1))?, old: num(2)?, new: num(3)? });
    }
    Ok(out)
}
