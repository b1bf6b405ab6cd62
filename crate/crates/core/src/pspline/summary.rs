//! Posterior summaries: growth rates, doubling times and prior transfer.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{weekday_index, DayOfWeekEffects};
use crate::stats::{mean, quantile_sorted, sample_sd};

use super::fit::PosteriorSamples;
use super::model::{ScalePrior, TrendPriors};

pub const SUMMARY_LEVELS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

/// Growth rate `r(t) = ds/dt` per draw (outer) and day (inner).
pub fn growth_rate(samples: &PosteriorSamples) -> Vec<Vec<f64>> {
    let design = samples.basis.daily_design();
    samples
        .draws
        .iter()
        .map(|d| design.iter().map(|loc| loc.dot_deriv(&d.b)).collect())
        .collect()
}

/// Growth-rate draws at an arbitrary position `t` (days from the basis start).
pub fn growth_rate_at(samples: &PosteriorSamples, t: f64) -> Result<Vec<f64>> {
    let loc = samples.basis.local(t)?;
    Ok(samples.draws.iter().map(|d| loc.dot_deriv(&d.b)).collect())
}

/// Log expected count `s(t)` per draw and day, without day-of-week effects.
pub fn log_trend(samples: &PosteriorSamples) -> Vec<Vec<f64>> {
    let design = samples.basis.daily_design();
    samples
        .draws
        .iter()
        .map(|d| design.iter().map(|loc| loc.dot(&d.b)).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySummary {
    pub date: NaiveDate,
    /// Quantiles of `exp(s(t))` at [`SUMMARY_LEVELS`].
    pub expected: [f64; 5],
    /// Quantiles including the day-of-week multiplier, when one is known.
    pub expected_dow: Option<[f64; 5]>,
    pub growth_rate: [f64; 5],
    pub p_growth: f64,
    /// `ln 2 / |median r|`, positive when growing and negative when shrinking.
    pub doubling_time: Option<f64>,
    /// The 95% interval of `r(t)` contains zero.
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSummary {
    pub days: Vec<DaySummary>,
}

fn five(values: &mut [f64]) -> [f64; 5] {
    values.sort_by(f64::total_cmp);
    SUMMARY_LEVELS.map(|q| quantile_sorted(values, q))
}

/// Signed doubling time from a median growth rate.
pub fn doubling_time(median_r: f64) -> Option<f64> {
    if median_r == 0.0 || !median_r.is_finite() {
        None
    } else {
        Some(std::f64::consts::LN_2 / median_r)
    }
}

/// Per-day quantiles of the trend and growth rate.
///
/// Day-of-week multipliers come from the draws when the model estimated them,
/// otherwise from `dow` if supplied.
pub fn summarise_trend(samples: &PosteriorSamples, dow: Option<&DayOfWeekEffects>) -> Result<TrendSummary> {
    if samples.len() < 400 {
        return Err(Error::Parameter(format!("need at least 400 draws to summarise, got {}", samples.len())));
    }
    let s = log_trend(samples);
    let r = growth_rate(samples);
    let n_days = samples.basis.n_days();
    let n = samples.len();
    let mut col = vec![0.0; n];
    let days = (0..n_days)
        .map(|t| {
            let date = samples.basis.date_of(t);
            let wd = weekday_index(date);
            col.iter_mut().zip(&s).for_each(|(c, row)| *c = row[t].exp());
            let expected = five(&mut col);
            let expected_dow = if samples.has_dow() {
                for (c, (row, d)) in col.iter_mut().zip(s.iter().zip(&samples.draws)) {
                    *c = (row[t] + d.log_omega.as_ref().map_or(0.0, |lw| lw[wd])).exp();
                }
                Some(five(&mut col))
            } else {
                dow.map(|e| expected.map(|q| q * e.omega[wd]))
            };
            col.iter_mut().zip(&r).for_each(|(c, row)| *c = row[t]);
            let p_growth = col.iter().filter(|&&x| x > 0.0).count() as f64 / n as f64;
            let growth_rate = five(&mut col);
            DaySummary {
                date,
                expected,
                expected_dow,
                growth_rate,
                p_growth,
                doubling_time: doubling_time(growth_rate[2]),
                stable: growth_rate[0] <= 0.0 && growth_rate[4] >= 0.0,
            }
        })
        .collect();
    Ok(TrendSummary { days })
}

/// Normal priors whose moments match the given draws of `tau` and `k`.
pub fn informative_priors(tau: &[f64], k: &[f64]) -> Result<TrendPriors> {
    let moments = |name: &str, v: &[f64]| -> Result<ScalePrior> {
        if v.len() < 2 {
            return Err(Error::Parameter(format!("need at least two {name} draws")));
        }
        let sd = sample_sd(v);
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(Error::Parameter(format!("posterior of {name} is degenerate (sd = {sd})")));
        }
        Ok(ScalePrior::Normal { mean: mean(v), sd })
    };
    Ok(TrendPriors { tau: moments("tau", tau)?, k: moments("k", k)? })
}

/// Transfer a fitted posterior into normal priors for a later fit.
pub fn derive_informative_priors(samples: &PosteriorSamples) -> Result<TrendPriors> {
    informative_priors(&samples.tau(), &samples.k())
}
