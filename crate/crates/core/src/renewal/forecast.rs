//! Forward simulation from the origin date without resampling.

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{sample_negbin, sample_poisson};
use crate::error::{Error, Result};
use crate::series::{SeriesKey, Stream};
use crate::stats::quantile_sorted;

use super::filter::{keyed_rng, ParticleEnsemble, RtSummary, RT_LEVELS};
use super::model::{chr_step, clamp_ln_r, convolve_observed, infection_pressure};

pub const FORECAST_LEVELS: [f64; 7] = [0.025, 0.05, 0.25, 0.5, 0.75, 0.95, 0.975];

/// Predictive samples for one observed stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetForecast {
    pub key: SeriesKey,
    pub dates: Vec<NaiveDate>,
    /// `samples[day][particle]`.
    pub samples: Vec<Vec<u64>>,
    /// `quantiles[day]` at [`FORECAST_LEVELS`].
    pub quantiles: Vec<[f64; 7]>,
}

impl TargetForecast {
    pub fn horizon_of(&self, date: NaiveDate) -> Option<usize> {
        self.dates.iter().position(|&d| d == date).map(|i| i + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub origin: NaiveDate,
    pub targets: Vec<TargetForecast>,
    /// R at the origin date.
    pub rt_origin: RtSummary,
    /// R over the forecast horizon.
    pub rt_forecast: Vec<RtSummary>,
}

impl ForecastResult {
    pub fn target(&self, stream: Stream) -> Option<&TargetForecast> {
        self.targets.iter().find(|t| t.key.stream == stream)
    }
}

fn quantile_row(values: &[u64]) -> [f64; 7] {
    let mut v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
    v.sort_by(f64::total_cmp);
    FORECAST_LEVELS.map(|q| quantile_sorted(&v, q))
}

fn rt_row(date: NaiveDate, values: &[f64]) -> RtSummary {
    let mut v: Vec<f64> = values.iter().map(|x| x.exp()).collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.sort_by(f64::total_cmp);
    RtSummary { date, mean, quantiles: RT_LEVELS.map(|q| quantile_sorted(&v, q)) }
}

struct ParticlePath {
    ln_r: Vec<f64>,
    cases: Vec<u64>,
    admissions: Vec<u64>,
}

/// Simulate `horizon` days past the origin for every particle and draw
/// observed cases (two-stream models) and admissions.
///
/// Day-of-week effects keep their origin-date estimates, applied by calendar weekday.
pub fn forecast(ensemble: &ParticleEnsemble, horizon: usize) -> Result<ForecastResult> {
    let n_days = ensemble.n_days();
    if ensemble.current_day() != n_days {
        return Err(Error::Parameter(format!(
            "ensemble has been filtered to day {} of {n_days}; run the filter to the origin first",
            ensemble.current_day()
        )));
    }
    let origin = ensemble.date_of(n_days - 1);
    let config = ensemble.config();
    let predictor = ensemble.predictor();
    let base = ensemble.base_rng();
    let r_start = ensemble.first_rt_day();
    let window = predictor.window();
    let max_lag = config.t_init() + 1;
    let two_stream = ensemble.two_stream();
    let dates: Vec<NaiveDate> = (1..=horizon).map(|h| origin + Duration::days(h as i64)).collect();
    let omega_c: Vec<f64> = dates.iter().map(|&d| ensemble.omega_c().for_date(d)).collect();
    let omega_h: Vec<f64> = dates.iter().map(|&d| ensemble.omega_h().for_date(d)).collect();

    let paths: Vec<ParticlePath> = (0..ensemble.n_particles())
        .into_par_iter()
        .map(|p| {
            let r_all = &ensemble.ln_r(p)[r_start..];
            let mut ln_r = r_all[r_all.len().saturating_sub(window)..].to_vec();
            let inf_all = ensemble.infections(p);
            let mut inf = inf_all[inf_all.len().saturating_sub(max_lag)..].to_vec();
            let mut ln_p = ensemble.ln_p(p).map_or(0.0, |lp| lp[n_days - 1]);
            let mut path = ParticlePath {
                ln_r: Vec::with_capacity(horizon),
                cases: Vec::with_capacity(horizon),
                admissions: Vec::with_capacity(horizon),
            };
            for h in 0..horizon {
                let mut rng = keyed_rng(base, p as u64, n_days + h);
                let start = ln_r.len().saturating_sub(window);
                let x = clamp_ln_r(predictor.step(&ln_r[start..], &mut rng));
                ln_r.push(x);
                let i_t = sample_poisson(&mut rng, x.exp() * infection_pressure(&inf, &config.gen_pmf));
                inf.push(i_t);
                if two_stream {
                    ln_p = chr_step(ln_p, config.sigma_p, &mut rng);
                }
                if let Some(report) = &config.report_pmf {
                    if two_stream {
                        let z = convolve_observed(&inf, report);
                        path.cases.push(sample_negbin(&mut rng, config.p_c * omega_c[h] * z, config.k_c));
                    }
                }
                let hh = convolve_observed(&inf, &config.admit_pmf);
                let mean_a = config.p_c * omega_h[h] * ln_p.exp() * hh;
                path.admissions.push(sample_negbin(&mut rng, mean_a, config.k_h));
                path.ln_r.push(x);
            }
            path
        })
        .collect();

    let pathogen = ensemble.pathogen();
    let mut targets = Vec::new();
    let mut build = |stream: Stream, pick: fn(&ParticlePath) -> &Vec<u64>| {
        let samples: Vec<Vec<u64>> = (0..horizon).map(|h| paths.iter().map(|p| pick(p)[h]).collect()).collect();
        let quantiles = samples.par_iter().map(|s| quantile_row(s)).collect();
        targets.push(TargetForecast { key: SeriesKey::new(pathogen, stream), dates: dates.clone(), samples, quantiles });
    };
    if two_stream {
        build(Stream::Cases, |p| &p.cases);
    }
    build(Stream::Admissions, |p| &p.admissions);

    let origin_values: Vec<f64> = (0..ensemble.n_particles()).map(|p| ensemble.ln_r(p)[n_days - 1]).collect();
    let rt_forecast = (0..horizon)
        .into_par_iter()
        .map(|h| rt_row(dates[h], &paths.iter().map(|p| p.ln_r[h]).collect::<Vec<_>>()))
        .collect();
    Ok(ForecastResult { origin, targets, rt_origin: rt_row(origin, &origin_values), rt_forecast })
}
