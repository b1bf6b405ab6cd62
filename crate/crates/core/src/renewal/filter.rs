//! Bootstrap particle filter with fixed-lag resampling.

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{estimate_dow_effects, CountSeries, DayOfWeekEffects, Pathogen};
use crate::stats::{centred_moving_average, quantile_sorted};

use super::config::ForecastConfig;
use super::gp::GpPredictor;
use super::model::{chr_step, clamp_ln_r, convolve_observed, infection_pressure, DayLikelihood};
use crate::dist::sample_poisson;

pub const RT_LEVELS: [f64; 7] = [0.025, 0.05, 0.25, 0.5, 0.75, 0.95, 0.975];

/// Observations aligned to simulation days, from the simulation start to the origin date.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterData {
    pathogen: Pathogen,
    start: NaiveDate,
    origin: NaiveDate,
    cases: Option<Vec<Option<u64>>>,
    admissions: Option<Vec<Option<u64>>>,
    omega_c: DayOfWeekEffects,
    omega_h: DayOfWeekEffects,
}

fn align(series: &CountSeries, start: NaiveDate, n_days: usize) -> Vec<Option<u64>> {
    (0..n_days).map(|d| series.count_on(start + Duration::days(d as i64))).collect()
}

fn dow_or_ones(series: &CountSeries, max_weeks: usize) -> DayOfWeekEffects {
    if series.len() < 7 {
        log::warn!("{}: fewer than 7 days of data, day-of-week effects set to 1", series.key());
        return DayOfWeekEffects::ones();
    }
    match estimate_dow_effects(series, max_weeks) {
        Ok(e) => {
            if e.degenerate {
                log::warn!("{}: no counts in the day-of-week window, effects set to 1", series.key());
            }
            e
        }
        Err(_) => DayOfWeekEffects::ones(),
    }
}

impl FilterData {
    /// Align the supplied series to a simulation period ending on `origin`.
    ///
    /// The period starts `max_history_days` before the origin or on the first
    /// data day, whichever is later. Day-of-week effects are estimated from
    /// each series up to the origin.
    pub fn new(
        cases: Option<&CountSeries>,
        admissions: Option<&CountSeries>,
        origin: NaiveDate,
        config: &ForecastConfig,
    ) -> Result<Self> {
        let supplied: Vec<&CountSeries> = cases.iter().chain(admissions.iter()).copied().collect();
        let Some(first) = supplied.first() else {
            return Err(Error::Parameter("need a case or an admission series".into()));
        };
        let pathogen = first.pathogen();
        if supplied.iter().any(|s| s.pathogen() != pathogen) {
            return Err(Error::Parameter("case and admission series are for different pathogens".into()));
        }
        if cases.is_some() && config.report_pmf.is_none() {
            return Err(Error::Parameter("case data supplied without an infection-to-report delay".into()));
        }
        let mut truncated = Vec::new();
        for s in &supplied {
            if origin > s.origin_date() {
                return Err(Error::Data(format!(
                    "origin date {origin} is after the last {} data day {}",
                    s.key(),
                    s.origin_date()
                )));
            }
            truncated.push(s.truncate_to(origin)?);
        }
        let first_day = supplied.iter().map(|s| s.start_date()).min().unwrap_or(origin);
        let earliest = origin - Duration::days(config.max_history_days as i64);
        let start = first_day.max(earliest);
        let n_days = (origin - start).num_days() as usize + 1;
        let mut it = truncated.iter();
        let cases_t = cases.map(|_| it.next().expect("truncated case series"));
        let adm_t = admissions.map(|_| it.next().expect("truncated admission series"));
        Ok(FilterData {
            pathogen,
            start,
            origin,
            cases: cases_t.map(|s| align(s, start, n_days)),
            admissions: adm_t.map(|s| align(s, start, n_days)),
            omega_c: cases_t.map_or_else(DayOfWeekEffects::ones, |s| dow_or_ones(s, config.dow_max_weeks)),
            omega_h: adm_t.map_or_else(DayOfWeekEffects::ones, |s| dow_or_ones(s, config.dow_max_weeks)),
        })
    }

    pub fn pathogen(&self) -> Pathogen {
        self.pathogen
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start
    }

    pub fn origin_date(&self) -> NaiveDate {
        self.origin
    }

    pub fn n_days(&self) -> usize {
        (self.origin - self.start).num_days() as usize + 1
    }

    pub fn date_of(&self, day: usize) -> NaiveDate {
        self.start + Duration::days(day as i64)
    }

    /// Cases drive the model (with a case–hospitalisation ratio) when present.
    pub fn two_stream(&self) -> bool {
        self.cases.is_some()
    }

    pub fn cases(&self) -> Option<&[Option<u64>]> {
        self.cases.as_deref()
    }

    pub fn admissions(&self) -> Option<&[Option<u64>]> {
        self.admissions.as_deref()
    }

    pub fn omega_c(&self) -> &DayOfWeekEffects {
        &self.omega_c
    }

    pub fn omega_h(&self) -> &DayOfWeekEffects {
        &self.omega_h
    }

    /// Drop every observation, keeping the calendar and day-of-week effects.
    pub fn without_observations(&self) -> Self {
        let blank = |v: &Option<Vec<Option<u64>>>| v.as_ref().map(|v| vec![None; v.len()]);
        FilterData { cases: blank(&self.cases), admissions: blank(&self.admissions), ..self.clone() }
    }

    fn day_likelihood(&self, day: usize, config: &ForecastConfig) -> DayLikelihood {
        let date = self.date_of(day);
        DayLikelihood::new(
            &config.observation_params(),
            self.omega_c.for_date(date),
            self.omega_h.for_date(date),
            self.cases.as_ref().and_then(|c| c[day]),
            self.admissions.as_ref().and_then(|a| a[day]),
        )
    }
}

/// RNG for one particle on one day, independent of scheduling.
pub(crate) fn keyed_rng(base: &ChaCha8Rng, stream: u64, day: usize) -> ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_stream(stream);
    rng.set_word_pos((day as u128) << 32);
    rng
}

const RESAMPLE_STREAM: u64 = u64::MAX;

/// Particle trajectories stored particle-major, one row of `n_days` per particle.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    config: ForecastConfig,
    predictor: GpPredictor,
    base_rng: ChaCha8Rng,
    pathogen: Pathogen,
    start: NaiveDate,
    n_days: usize,
    t_init: usize,
    day: usize,
    two_stream: bool,
    ln_r: Vec<f64>,
    infections: Vec<u64>,
    /// `n_days` per particle when two-stream, otherwise one unused slot.
    ln_p: Vec<f64>,
    omega_c: DayOfWeekEffects,
    omega_h: DayOfWeekEffects,
}

/// Per-day filter diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub dates: Vec<NaiveDate>,
    /// Effective sample size before resampling on each filtered day.
    pub ess: Vec<f64>,
    /// Sum over days of the log mean particle likelihood.
    pub log_likelihood: f64,
}

/// Initial case–hospitalisation ratio from the opening days of data.
pub fn initial_chr(cases: &[Option<u64>], admissions: Option<&[Option<u64>]>, days: usize) -> f64 {
    const FALLBACK: f64 = 0.1;
    let Some(adm) = admissions else {
        log::warn!("no admission data: initial case-hospitalisation ratio set to {FALLBACK}");
        return FALLBACK;
    };
    let n = days.min(cases.len());
    let c: u64 = cases[..n].iter().flatten().sum();
    let a: u64 = adm[..n.min(adm.len())].iter().flatten().sum();
    if c == 0 || a == 0 {
        log::warn!("{a} admissions and {c} cases in the first {n} days: initial case-hospitalisation ratio set to {FALLBACK}");
        return FALLBACK;
    }
    a as f64 / c as f64
}

/// Draw the initial infections, ln R and case–hospitalisation ratio.
pub fn initialize(data: &FilterData, config: &ForecastConfig) -> Result<ParticleEnsemble> {
    config.validate()?;
    let n_days = data.n_days();
    let t_init = config.t_init();
    if n_days < t_init + 7 {
        return Err(Error::InsufficientData(format!(
            "{n_days} days of data before the origin; need at least {}",
            t_init + 7
        )));
    }
    let two_stream = data.two_stream();
    let (anchor, shift, scale) = if two_stream {
        let report = config.report_pmf.as_ref().expect("validated with cases");
        (data.cases.as_ref().expect("two-stream"), report.mean_rounded(), config.p_c)
    } else {
        let adm = data
            .admissions
            .as_ref()
            .ok_or_else(|| Error::Parameter("need a case or an admission series".into()))?;
        (adm, config.admit_pmf.mean_rounded(), 1.0)
    };
    let values: Vec<f64> = anchor.iter().map(|v| v.unwrap_or(0) as f64).collect();
    let smooth = centred_moving_average(&values, 7);
    let init_mean: Vec<f64> = (0..t_init).map(|d| smooth[(d + shift).min(n_days - 1)] / scale).collect();

    let p_bar = if two_stream {
        initial_chr(data.cases.as_deref().expect("two-stream"), data.admissions.as_deref(), config.chr_estimation_days)
    } else {
        1.0
    };
    let shape = 1.0 / (config.p_cv * config.p_cv);
    let chr_dist = Gamma::new(shape, p_bar / shape).map_err(|e| Error::Parameter(format!("initial CHR: {e}")))?;
    let ln_r_sd = config.initial_ln_r_variance().sqrt();

    let n = config.n_particles;
    let p_stride = if two_stream { n_days } else { 1 };
    let mut ln_r = vec![f64::NAN; n * n_days];
    let mut infections = vec![0u64; n * n_days];
    let mut ln_p = vec![0.0; n * p_stride];
    let base_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let last = t_init - 1;
    ln_r.par_chunks_mut(n_days)
        .zip(infections.par_chunks_mut(n_days))
        .zip(ln_p.par_chunks_mut(p_stride))
        .enumerate()
        .for_each(|(p, ((r, inf), lp))| {
            for d in 0..t_init {
                let mut rng = keyed_rng(&base_rng, p as u64, d);
                inf[d] = sample_poisson(&mut rng, init_mean[d]);
                if d == last {
                    r[d] = clamp_ln_r(ln_r_sd * rng.sample::<f64, _>(StandardNormal));
                    if two_stream {
                        lp[d] = chr_dist.sample(&mut rng).ln();
                    }
                }
            }
        });
    Ok(ParticleEnsemble {
        predictor: GpPredictor::new(config.kernel, config.window)?,
        config: config.clone(),
        base_rng,
        pathogen: data.pathogen,
        start: data.start,
        n_days,
        t_init,
        day: t_init,
        two_stream,
        ln_r,
        infections,
        ln_p,
        omega_c: data.omega_c,
        omega_h: data.omega_h,
    })
}

/// Systematic resampling: ancestor index for each of `weights.len()` slots.
pub fn systematic_resample(weights: &[f64], u: f64) -> Vec<usize> {
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    let step = total / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut j = 0;
    for i in 0..n {
        let target = (u + i as f64) * step;
        while cum < target && j + 1 < n {
            j += 1;
            cum += weights[j];
        }
        out.push(j);
    }
    out
}

impl ParticleEnsemble {
    pub fn config(&self) -> &ForecastConfig {
        &self.config
    }

    pub fn pathogen(&self) -> Pathogen {
        self.pathogen
    }

    pub fn n_particles(&self) -> usize {
        self.config.n_particles
    }

    pub fn n_days(&self) -> usize {
        self.n_days
    }

    /// Next day to be simulated.
    pub fn current_day(&self) -> usize {
        self.day
    }

    /// First day with an ln R value.
    pub fn first_rt_day(&self) -> usize {
        self.t_init - 1
    }

    pub fn t_init(&self) -> usize {
        self.t_init
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start
    }

    pub fn date_of(&self, day: usize) -> NaiveDate {
        self.start + Duration::days(day as i64)
    }

    pub fn two_stream(&self) -> bool {
        self.two_stream
    }

    pub fn omega_c(&self) -> &DayOfWeekEffects {
        &self.omega_c
    }

    pub fn omega_h(&self) -> &DayOfWeekEffects {
        &self.omega_h
    }

    pub(crate) fn predictor(&self) -> &GpPredictor {
        &self.predictor
    }

    pub(crate) fn base_rng(&self) -> &ChaCha8Rng {
        &self.base_rng
    }

    /// ln R trajectory of one particle (NaN before [`Self::first_rt_day`]).
    pub fn ln_r(&self, particle: usize) -> &[f64] {
        &self.ln_r[particle * self.n_days..(particle + 1) * self.n_days]
    }

    pub fn infections(&self, particle: usize) -> &[u64] {
        &self.infections[particle * self.n_days..(particle + 1) * self.n_days]
    }

    /// ln case–hospitalisation ratio trajectory; `None` for single-stream models.
    pub fn ln_p(&self, particle: usize) -> Option<&[f64]> {
        self.two_stream
            .then(|| &self.ln_p[particle * self.n_days..(particle + 1) * self.n_days])
    }

    /// Simulate day `self.current_day()` for every particle and resample on its data.
    /// Returns the effective sample size and the log mean likelihood.
    pub fn step(&mut self, data: &FilterData) -> Result<(f64, f64)> {
        let t = self.day;
        if t >= self.n_days {
            return Err(Error::Range(format!("filter already reached day {}", self.n_days - 1)));
        }
        if data.n_days() != self.n_days || data.start != self.start {
            return Err(Error::Parameter("data do not match the ensemble's simulation period".into()));
        }
        let lik = data.day_likelihood(t, &self.config);
        let n_days = self.n_days;
        let r_start = self.t_init - 1;
        let two_stream = self.two_stream;
        let p_stride = if two_stream { n_days } else { 1 };
        let config = &self.config;
        let predictor = &self.predictor;
        let base = &self.base_rng;
        let report = config.report_pmf.as_ref();
        let admit = &config.admit_pmf;
        let log_w: Vec<f64> = self
            .ln_r
            .par_chunks_mut(n_days)
            .zip(self.infections.par_chunks_mut(n_days))
            .zip(self.ln_p.par_chunks_mut(p_stride))
            .enumerate()
            .map(|(p, ((r, inf), lp))| {
                let mut rng = keyed_rng(base, p as u64, t);
                let ln_r_t = clamp_ln_r(predictor.step(&r[r_start..t], &mut rng));
                r[t] = ln_r_t;
                inf[t] = sample_poisson(&mut rng, ln_r_t.exp() * infection_pressure(&inf[..t], &config.gen_pmf));
                let chr = if two_stream {
                    lp[t] = chr_step(lp[t - 1], config.sigma_p, &mut rng);
                    lp[t].exp()
                } else {
                    1.0
                };
                if lik.is_empty() {
                    return 0.0;
                }
                let hist = &inf[..=t];
                let z = match (report, lik.cases.is_some()) {
                    (Some(pmf), true) => convolve_observed(hist, pmf),
                    _ => 0.0,
                };
                let h = if lik.admissions.is_some() { convolve_observed(hist, admit) } else { 0.0 };
                lik.ln_lik(z, h, chr)
            })
            .collect();
        self.day += 1;
        let n = log_w.len();
        if lik.is_empty() {
            return Ok((n as f64, 0.0));
        }
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY || max.is_nan() {
            return Err(Error::Degenerate { day: t, date: self.date_of(t) });
        }
        let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
        let sum: f64 = w.iter().sum();
        let sum_sq: f64 = w.iter().map(|x| x * x).sum();
        let ess = sum * sum / sum_sq;
        let log_mean = max + (sum / n as f64).ln();

        let mut rng = keyed_rng(&self.base_rng, RESAMPLE_STREAM, t);
        let ancestors = systematic_resample(&w, rng.random::<f64>());
        let c0 = (t + 1).saturating_sub(self.config.lag);
        self.rewrite(&ancestors, c0, t + 1);
        Ok((ess, log_mean))
    }

    /// Replace columns `c0..c1` of every particle with those of its ancestor.
    fn rewrite(&mut self, ancestors: &[usize], c0: usize, c1: usize) {
        fn copy_block<T: Copy + Send + Sync>(rows: &mut [T], stride: usize, ancestors: &[usize], c0: usize, c1: usize) {
            let w = c1 - c0;
            let mut block = vec![rows[0]; ancestors.len() * w];
            block.par_chunks_mut(w).zip(ancestors.par_iter()).for_each(|(dst, &a)| {
                dst.copy_from_slice(&rows[a * stride + c0..a * stride + c1]);
            });
            rows.par_chunks_mut(stride).zip(block.par_chunks(w)).for_each(|(row, src)| {
                row[c0..c1].copy_from_slice(src);
            });
        }
        if ancestors.iter().enumerate().all(|(i, &a)| i == a) {
            return;
        }
        copy_block(&mut self.ln_r, self.n_days, ancestors, c0, c1);
        copy_block(&mut self.infections, self.n_days, ancestors, c0, c1);
        if self.two_stream {
            copy_block(&mut self.ln_p, self.n_days, ancestors, c0, c1);
        }
    }

    /// Mean expected reports `E[Z_t]` across particles for each day from the
    /// first filtered day; `None` without a report delay.
    pub fn expected_reports(&self) -> Option<Vec<f64>> {
        let pmf = self.config.report_pmf.as_ref()?;
        Some(self.mean_convolution(pmf))
    }

    /// Mean expected admissions `E[P_t H_t]` across particles from the first filtered day.
    pub fn expected_admissions(&self) -> Vec<f64> {
        let pmf = &self.config.admit_pmf;
        let n = self.n_particles() as f64;
        (self.t_init..self.day)
            .map(|t| {
                (0..self.n_particles())
                    .map(|p| {
                        let chr = self.ln_p(p).map_or(1.0, |lp| lp[t].exp());
                        chr * convolve_observed(&self.infections(p)[..=t], pmf)
                    })
                    .sum::<f64>()
                    / n
            })
            .collect()
    }

    fn mean_convolution(&self, pmf: &crate::delay::DiscretePmf) -> Vec<f64> {
        let n = self.n_particles() as f64;
        (self.t_init..self.day)
            .map(|t| (0..self.n_particles()).map(|p| convolve_observed(&self.infections(p)[..=t], pmf)).sum::<f64>() / n)
            .collect()
    }
}

/// Run the filter from the current day to the origin date.
pub fn run_filter(ensemble: &mut ParticleEnsemble, data: &FilterData) -> Result<FilterReport> {
    let mut report = FilterReport { dates: Vec::new(), ess: Vec::new(), log_likelihood: 0.0 };
    while ensemble.current_day() < ensemble.n_days() {
        let day = ensemble.current_day();
        let (ess, ll) = ensemble.step(data)?;
        report.dates.push(ensemble.date_of(day));
        report.ess.push(ess);
        report.log_likelihood += ll;
    }
    Ok(report)
}

/// Posterior summary of R on one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtSummary {
    pub date: NaiveDate,
    pub mean: f64,
    /// Quantiles at [`RT_LEVELS`].
    pub quantiles: [f64; 7],
}

fn summarise_values(date: NaiveDate, mut values: Vec<f64>) -> RtSummary {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.sort_by(f64::total_cmp);
    RtSummary { date, mean, quantiles: RT_LEVELS.map(|q| quantile_sorted(&values, q)) }
}

/// R quantiles across particles for each day with an ln R value, up to the last simulated day.
pub fn rt_summary(ensemble: &ParticleEnsemble) -> Vec<RtSummary> {
    (ensemble.first_rt_day()..ensemble.current_day())
        .into_par_iter()
        .map(|t| {
            let values = (0..ensemble.n_particles()).map(|p| ensemble.ln_r(p)[t].exp()).collect();
            summarise_values(ensemble.date_of(t), values)
        })
        .collect()
}
