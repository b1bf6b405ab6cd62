//! Synthetic epidemics drawn from the forecasting model's own generative process.

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::delay::DiscretePmf;
use crate::dist::{sample_negbin, sample_poisson};
use crate::error::{Error, Result};
use crate::renewal::gp::{GpKernel, GpPredictor};
use crate::renewal::model::{convolve_observed, infection_pressure};
use crate::series::{CountSeries, DayOfWeekEffects, Pathogen, Stream};

/// Days of constant infections preceding day 0.
pub const RAMP_DAYS: usize = 21;

/// Known reproduction number over the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RtTrajectory {
    Constant { r: f64 },
    /// Consecutive `(days, r)` segments; the last value continues to the end.
    Piecewise { segments: Vec<(usize, f64)> },
    /// `mean * exp(amplitude * sin(2 pi (t + phase) / period))`.
    Sinusoidal { mean: f64, amplitude: f64, period: f64, phase: f64 },
    /// ln R drawn from the forecaster's Gaussian process around `ln(mean)`.
    GpSampled { mean: f64, kernel: GpKernel, window: usize },
    Values { r: Vec<f64> },
}

/// Case–hospitalisation ratio over the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChrTrajectory {
    Constant { p: f64 },
    RandomWalk { initial: f64, sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub pathogen: Pathogen,
    pub start_date: NaiveDate,
    pub length: usize,
    pub rt: RtTrajectory,
    /// Daily infections during the ramp before day 0.
    pub seed_infections: f64,
    pub gen_pmf: DiscretePmf,
    /// Infection-to-report delay; without it no cases are generated.
    pub report_pmf: Option<DiscretePmf>,
    pub admit_pmf: DiscretePmf,
    pub dow_cases: Option<DayOfWeekEffects>,
    pub dow_admissions: Option<DayOfWeekEffects>,
    pub p_c: f64,
    pub k_c: f64,
    pub k_h: f64,
    pub chr: ChrTrajectory,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::Parameter("scenario length must be positive".into()));
        }
        if !(self.seed_infections >= 0.0 && self.seed_infections.is_finite()) {
            return Err(Error::Parameter("seed infections must be non-negative".into()));
        }
        if !(self.p_c > 0.0 && self.p_c <= 1.0) || !(self.k_c > 0.0) || !(self.k_h > 0.0) {
            return Err(Error::Parameter("need 0 < p_c <= 1 and positive dispersions".into()));
        }
        match &self.rt {
            RtTrajectory::Constant { r } if !(*r > 0.0) => {
                return Err(Error::Parameter(format!("R must be positive, got {r}")));
            }
            RtTrajectory::Piecewise { segments } => {
                if segments.is_empty() || segments.iter().any(|(_, r)| !(*r > 0.0)) {
                    return Err(Error::Parameter("piecewise R needs positive segment values".into()));
                }
            }
            RtTrajectory::Sinusoidal { mean, period, .. } if !(*mean > 0.0 && *period > 0.0) => {
                return Err(Error::Parameter("sinusoidal R needs positive mean and period".into()));
            }
            RtTrajectory::GpSampled { mean, kernel, window } => {
                kernel.validate()?;
                if !(*mean > 0.0) || *window == 0 {
                    return Err(Error::Parameter("GP-sampled R needs a positive mean and window".into()));
                }
            }
            RtTrajectory::Values { r } if r.len() != self.length || r.iter().any(|v| !(*v > 0.0)) => {
                return Err(Error::Parameter(format!("need {} positive R values", self.length)));
            }
            _ => {}
        }
        match self.chr {
            ChrTrajectory::Constant { p } if !(p > 0.0) => Err(Error::Parameter("CHR must be positive".into())),
            ChrTrajectory::RandomWalk { initial, sigma } if !(initial > 0.0 && sigma >= 0.0) => {
                Err(Error::Parameter("CHR walk needs positive start and non-negative sd".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Latent states of the simulated epidemic, one value per day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentTruth {
    pub start_date: NaiveDate,
    pub r: Vec<f64>,
    pub infections: Vec<u64>,
    pub z: Vec<f64>,
    pub h: Vec<f64>,
    pub chr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub truth: LatentTruth,
    pub cases: Option<CountSeries>,
    pub admissions: CountSeries,
    /// Infections fell to zero and the renewal process can no longer restart.
    pub extinct: bool,
}

fn rt_values<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Result<Vec<f64>> {
    let n = spec.length;
    Ok(match &spec.rt {
        RtTrajectory::Constant { r } => vec![*r; n],
        RtTrajectory::Piecewise { segments } => {
            let mut out = Vec::with_capacity(n);
            for (days, r) in segments {
                out.extend(std::iter::repeat_n(*r, *days));
            }
            let last = segments.last().map(|s| s.1).unwrap_or(1.0);
            out.resize(n, last);
            out
        }
        RtTrajectory::Sinusoidal { mean, amplitude, period, phase } => (0..n)
            .map(|t| mean * (amplitude * (2.0 * std::f64::consts::PI * (t as f64 + phase) / period).sin()).exp())
            .collect(),
        RtTrajectory::GpSampled { mean, kernel, window } => {
            let gp = GpPredictor::new(*kernel, *window)?;
            let mut ln_r: Vec<f64> = Vec::with_capacity(n);
            for _ in 0..n {
                let next = gp.step(&ln_r, rng);
                ln_r.push(next);
            }
            ln_r.iter().map(|x| mean * x.exp()).collect()
        }
        RtTrajectory::Values { r } => r.clone(),
    })
}

/// Run the scenario with the RNG stream for `replicate`.
pub fn simulate_replicate(spec: &ScenarioSpec, replicate: u64) -> Result<SimOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(replicate);
    let n = spec.length;
    let r = rt_values(spec, &mut rng)?;
    let ramp = spec.seed_infections.round() as u64;
    let mut inf: Vec<u64> = vec![ramp; RAMP_DAYS];
    let mut chr = Vec::with_capacity(n);
    let mut ln_p = match spec.chr {
        ChrTrajectory::Constant { p } => p.ln(),
        ChrTrajectory::RandomWalk { initial, .. } => initial.ln(),
    };
    let (mut z, mut h) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut cases = Vec::with_capacity(n);
    let mut admissions = Vec::with_capacity(n);
    for t in 0..n {
        let date = spec.start_date + Duration::days(t as i64);
        let i_t = sample_poisson(&mut rng, r[t] * infection_pressure(&inf, &spec.gen_pmf));
        inf.push(i_t);
        if let ChrTrajectory::RandomWalk { sigma, .. } = spec.chr {
            if t > 0 {
                ln_p += sigma * rng.sample::<f64, _>(StandardNormal);
            }
        }
        chr.push(ln_p.exp());
        let z_t = spec.report_pmf.as_ref().map_or(0.0, |pmf| convolve_observed(&inf, pmf));
        let h_t = convolve_observed(&inf, &spec.admit_pmf);
        if spec.report_pmf.is_some() {
            let w = spec.dow_cases.as_ref().map_or(1.0, |e| e.for_date(date));
            cases.push(sample_negbin(&mut rng, spec.p_c * w * z_t, spec.k_c));
        }
        let w = spec.dow_admissions.as_ref().map_or(1.0, |e| e.for_date(date));
        let p = if spec.report_pmf.is_some() { ln_p.exp() } else { 1.0 };
        admissions.push(sample_negbin(&mut rng, spec.p_c * w * p * h_t, spec.k_h));
        z.push(z_t);
        h.push(h_t);
    }
    let tail = spec.gen_pmf.max_lag().min(n);
    let extinct = inf[inf.len() - tail..].iter().all(|&i| i == 0);
    let infections = inf[RAMP_DAYS..].to_vec();
    let case_series = match spec.report_pmf {
        Some(_) => Some(CountSeries::new(spec.pathogen, Stream::Cases, spec.start_date, cases)?),
        None => None,
    };
    Ok(SimOutput {
        truth: LatentTruth { start_date: spec.start_date, r, infections, z, h, chr },
        cases: case_series,
        admissions: CountSeries::new(spec.pathogen, Stream::Admissions, spec.start_date, admissions)?,
        extinct,
    })
}

pub fn simulate(spec: &ScenarioSpec) -> Result<SimOutput> {
    simulate_replicate(spec, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::{discretize_gamma, DelaySpec};

    fn spec() -> ScenarioSpec {
        ScenarioSpec {
            pathogen: Pathogen::SarsCov2,
            start_date: NaiveDate::from_ymd_opt(2025, 1, 6).unwrap(),
            length: 60,
            rt: RtTrajectory::Constant { r: 1.0 },
            seed_infections: 500.0,
            gen_pmf: discretize_gamma(&DelaySpec::new(3.3, 3.5, 1, 15).unwrap()).unwrap(),
            report_pmf: Some(discretize_gamma(&DelaySpec::new(6.3, 3.1, 0, 25).unwrap()).unwrap()),
            admit_pmf: discretize_gamma(&DelaySpec::new(6.3, 3.7, 0, 25).unwrap()).unwrap(),
            dow_cases: None,
            dow_admissions: None,
            p_c: 1.0,
            k_c: 25.0,
            k_h: 25.0,
            chr: ChrTrajectory::Constant { p: 0.05 },
            seed: 3,
        }
    }

    #[test]
    fn lengths_match_and_seeded() {
        let s = spec();
        let a = simulate(&s).unwrap();
        let b = simulate(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.truth.r.len(), 60);
        assert_eq!(a.truth.infections.len(), 60);
        assert_eq!(a.cases.as_ref().unwrap().len(), 60);
        assert_eq!(a.admissions.len(), 60);
        assert_ne!(simulate_replicate(&s, 1).unwrap(), a);
    }

    #[test]
    fn piecewise_trajectory_layout() {
        let s = ScenarioSpec { rt: RtTrajectory::Piecewise { segments: vec![(40, 1.3), (20, 0.8)] }, ..spec() };
        let out = simulate(&s).unwrap();
        assert_eq!(out.truth.r[39], 1.3);
        assert_eq!(out.truth.r[40], 0.8);
    }

    #[test]
    fn extinction_flagged() {
        let s = ScenarioSpec { rt: RtTrajectory::Constant { r: 0.05 }, seed_infections: 2.0, ..spec() };
        let out = simulate(&s).unwrap();
        assert!(out.extinct);
        assert!(!simulate(&spec()).unwrap().extinct);
    }

    #[test]
    fn invalid_spec_rejected() {
        assert!(simulate(&ScenarioSpec { rt: RtTrajectory::Constant { r: 0.0 }, ..spec() }).is_err());
        assert!(simulate(&ScenarioSpec { rt: RtTrajectory::Values { r: vec![1.0; 3] }, ..spec() }).is_err());
    }
}
