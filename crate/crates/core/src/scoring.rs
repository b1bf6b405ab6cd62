//! Continuous ranked probability score for sample-based forecasts.
//!
//! Scores are computed on transformed counts (by default `ln(1 + x)`) so that
//! they measure relative rather than absolute error.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::parse_date;
use crate::renewal::export::SampleTable;
use crate::series::{CountSeries, Pathogen, SeriesKey, Stream};

/// Sample CRPS in energy form: `E|X - y| - E|X - X'| / 2` over the empirical
/// distribution of `samples`.
///
/// ```
/// let crps = respicast::scoring::crps_samples(&[0.0, 2f64.ln()], 0.0).unwrap();
/// assert!((crps - 2f64.ln() / 4.0).abs() < 1e-15);
/// ```
pub fn crps_samples(samples: &[f64], obs: f64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::Parameter(format!("CRPS needs at least 2 samples, got {}", samples.len())));
    }
    if samples.iter().any(|x| !x.is_finite()) || !obs.is_finite() {
        return Err(Error::Parameter("CRPS inputs must be finite".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let abs_err = sorted.iter().map(|x| (x - obs).abs()).sum::<f64>() / n;
    // sum_{i,j} |x_i - x_j| = 2 sum_i (2i - n + 1) (x_(i) - x_(0)) for sorted x.
    let lo = sorted[0];
    let spread: f64 = sorted.iter().enumerate().map(|(i, x)| (2.0 * i as f64 - n + 1.0) * (x - lo)).sum::<f64>() * 2.0;
    Ok((abs_err - spread / (2.0 * n * n)).max(0.0))
}

/// Transform applied to forecast samples and observations before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Transform {
    /// `ln(1 + x)`.
    Log1p,
    /// `ln(x + epsilon)`.
    LogOffset(f64),
    Identity,
}

impl Transform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Log1p => x.ln_1p(),
            Transform::LogOffset(eps) => (x + eps).ln(),
            Transform::Identity => x,
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::Log1p => f.write_str("log1p"),
            Transform::LogOffset(eps) => write!(f, "log:{eps}"),
            Transform::Identity => f.write_str("identity"),
        }
    }
}

impl FromStr for Transform {
    type Err = Error;

    /// Accepts `log1p`, `identity` or `log:<epsilon>` with a positive epsilon.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "log1p" => Ok(Transform::Log1p),
            "identity" | "none" => Ok(Transform::Identity),
            other => {
                let eps = other
                    .strip_prefix("log:")
                    .and_then(|e| e.parse::<f64>().ok())
                    .ok_or_else(|| Error::Parameter(format!("unknown transform {s:?}")))?;
                if !(eps > 0.0 && eps.is_finite()) {
                    return Err(Error::Parameter(format!("log offset must be positive, got {eps}")));
                }
                Ok(Transform::LogOffset(eps))
            }
        }
    }
}

impl TryFrom<String> for Transform {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Transform> for String {
    fn from(t: Transform) -> String {
        t.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreSettings {
    pub transform: Transform,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for ScoreSettings {
    fn default() -> Self {
        ScoreSettings { transform: Transform::Log1p, n_samples: 2000, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub target: SeriesKey,
    pub origin_date: NaiveDate,
    pub horizon: usize,
    pub crps: f64,
    pub n_samples: usize,
}

fn stream_id(key: SeriesKey, date: NaiveDate) -> u64 {
    let p = Pathogen::ALL.iter().position(|&x| x == key.pathogen).unwrap_or(0) as u64;
    let s = matches!(key.stream, Stream::Admissions) as u64;
    ((date.num_days_from_ce() as u64) << 8) | (p << 1) | s
}

/// Draw `n` of `values`: a random subset when there are enough, otherwise with replacement.
fn subsample<R: Rng>(values: &[f64], n: usize, rng: &mut R) -> Vec<f64> {
    if values.len() >= n {
        index::sample(rng, values.len(), n).into_iter().map(|i| values[i]).collect()
    } else {
        (0..n).map(|_| values[rng.random_range(0..values.len())]).collect()
    }
}

/// Forecast dates for `truth`'s target that the truth series does not cover.
pub fn missing_truth_dates(forecast: &SampleTable, truth: &CountSeries) -> Vec<NaiveDate> {
    forecast
        .entries
        .keys()
        .filter(|(k, d)| *k == truth.key() && truth.count_on(*d).is_none())
        .map(|(_, d)| *d)
        .collect()
}

/// Score every forecast day of `truth`'s target that the truth series covers.
///
/// Each day draws its own subsample from an RNG keyed by target and date, so
/// records do not depend on which other days are scored.
pub fn score_forecast(forecast: &SampleTable, truth: &CountSeries, settings: &ScoreSettings) -> Result<Vec<ScoreRecord>> {
    if settings.n_samples < 2 {
        return Err(Error::Parameter("scoring needs at least 2 samples per day".into()));
    }
    let key = truth.key();
    let days: Vec<(NaiveDate, usize, &Vec<f64>, f64)> = forecast
        .entries
        .iter()
        .filter(|((k, _), _)| *k == key)
        .filter_map(|((_, date), (h, s))| match truth.count_on(*date) {
            Some(y) => Some((*date, *h, s, y as f64)),
            None => {
                log::warn!("{key}: no observation on {date}; day not scored");
                None
            }
        })
        .collect();
    days.par_iter()
        .map(|&(date, horizon, samples, y)| {
            if samples.is_empty() {
                return Err(Error::Data(format!("{key} {date}: no forecast samples")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            rng.set_stream(stream_id(key, date));
            let drawn: Vec<f64> =
                subsample(samples, settings.n_samples, &mut rng).into_iter().map(|x| settings.transform.apply(x)).collect();
            Ok(ScoreRecord {
                target: key,
                origin_date: date - Duration::days(horizon as i64),
                horizon,
                crps: crps_samples(&drawn, settings.transform.apply(y))?,
                n_samples: drawn.len(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonMean {
    pub target: SeriesKey,
    pub horizon: usize,
    pub mean_crps: f64,
    pub n_origins: usize,
}

/// Mean CRPS over origin dates, grouped by target and horizon.
pub fn mean_crps_by_horizon(records: &[ScoreRecord]) -> Vec<HorizonMean> {
    let mut groups: BTreeMap<(SeriesKey, usize), (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = groups.entry((r.target, r.horizon)).or_default();
        e.0 += r.crps;
        e.1 += 1;
    }
    groups
        .into_iter()
        .map(|((target, horizon), (sum, n))| HorizonMean { target, horizon, mean_crps: sum / n as f64, n_origins: n })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoreRow {
    target: String,
    origin_date: String,
    horizon: usize,
    crps: f64,
}

/// `target,origin_date,horizon,crps`.
pub fn write_scores<W: Write>(records: &[ScoreRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(ScoreRow {
            target: r.target.to_string(),
            origin_date: r.origin_date.to_string(),
            horizon: r.horizon,
            crps: r.crps,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a score CSV. `n_samples` is not stored and comes back as 0.
pub fn read_scores<R: Read>(reader: R) -> Result<Vec<ScoreRecord>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|row| {
            let row: ScoreRow = row?;
            Ok(ScoreRecord {
                target: row.target.parse()?,
                origin_date: parse_date(&row.origin_date)?,
                horizon: row.horizon,
                crps: row.crps,
                n_samples: 0,
            })
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct HorizonRow {
    target: String,
    horizon: usize,
    mean_crps: f64,
    n_origins: usize,
}

/// `target,horizon,mean_crps,n_origins`.
pub fn write_horizon_means<W: Write>(means: &[HorizonMean], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for m in means {
        w.serialize(HorizonRow {
            target: m.target.to_string(),
            horizon: m.horizon,
            mean_crps: m.mean_crps,
            n_origins: m.n_origins,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_horizon_means<R: Read>(reader: R) -> Result<Vec<HorizonMean>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|row| {
            let row: HorizonRow = row?;
            Ok(HorizonMean { target: row.target.parse()?, horizon: row.horizon, mean_crps: row.mean_crps, n_origins: row.n_origins })
        })
        .collect()
}
