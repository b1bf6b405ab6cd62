//! One-day building blocks of the renewal process and its observation model.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::delay::DiscretePmf;
use crate::dist::{negbin_ln_pmf, sample_poisson, CountLikelihood};

/// Bounds on ln R during propagation.
pub const LN_R_BOUNDS: (f64, f64) = (-5.0, 5.0);

#[inline]
pub fn clamp_ln_r(x: f64) -> f64 {
    x.clamp(LN_R_BOUNDS.0, LN_R_BOUNDS.1)
}

/// Infection pressure `sum_s g_s I_{t-s}` where `history` ends at `I_{t-1}`.
/// Lags reaching before the start of `history` contribute zero.
#[inline]
pub fn infection_pressure(history: &[u64], gen_pmf: &DiscretePmf) -> f64 {
    let n = history.len();
    gen_pmf
        .iter()
        .filter(|&(s, _)| s >= 1 && s <= n)
        .map(|(s, g)| g * history[n - s] as f64)
        .sum()
}

/// Draw `I_t ~ Poisson(R_t sum_s g_s I_{t-s})`; `history` ends at `I_{t-1}`.
pub fn renewal_step<R: Rng + ?Sized>(history: &[u64], r_t: f64, gen_pmf: &DiscretePmf, rng: &mut R) -> u64 {
    sample_poisson(rng, r_t * infection_pressure(history, gen_pmf))
}

/// `sum_s pmf_s I_{t-s}` where `history` ends at `I_t`; lags before the
/// start of `history` contribute zero.
#[inline]
pub fn convolve_observed(history: &[u64], pmf: &DiscretePmf) -> f64 {
    let n = history.len();
    pmf.iter()
        .filter(|&(s, _)| s < n)
        .map(|(s, p)| p * history[n - 1 - s] as f64)
        .sum()
}

/// `ln P_{t+1} ~ N(ln P_t, sigma_p^2)`.
pub fn chr_step<R: Rng + ?Sized>(ln_p: f64, sigma_p: f64, rng: &mut R) -> f64 {
    if sigma_p == 0.0 {
        return ln_p;
    }
    ln_p + sigma_p * rng.sample::<f64, _>(StandardNormal)
}

/// Observation parameters shared by every day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationParams {
    pub p_c: f64,
    pub k_c: f64,
    pub k_h: f64,
}

/// One day's inputs to the observation model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayObservation {
    pub z: f64,
    pub h: f64,
    /// Case–hospitalisation ratio; 1 for single-stream pathogens.
    pub p: f64,
    pub omega_c: f64,
    pub omega_h: f64,
    pub cases: Option<u64>,
    pub admissions: Option<u64>,
}

/// Joint log-likelihood of the observations present on one day.
pub fn observation_loglik(obs: &DayObservation, params: &ObservationParams) -> f64 {
    let mut ll = 0.0;
    if let Some(c) = obs.cases {
        ll += negbin_ln_pmf(c, params.p_c * obs.omega_c * obs.z, params.k_c);
    }
    if let Some(a) = obs.admissions {
        ll += negbin_ln_pmf(a, params.p_c * obs.omega_h * obs.p * obs.h, params.k_h);
    }
    ll
}

/// Per-day likelihood with the mean-free constants precomputed.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DayLikelihood {
    pub cases: Option<(CountLikelihood, f64)>,
    pub admissions: Option<(CountLikelihood, f64)>,
}

impl DayLikelihood {
    pub fn new(params: &ObservationParams, omega_c: f64, omega_h: f64, cases: Option<u64>, admissions: Option<u64>) -> Self {
        DayLikelihood {
            cases: cases.map(|c| (CountLikelihood::new(c, params.k_c), params.p_c * omega_c)),
            admissions: admissions.map(|a| (CountLikelihood::new(a, params.k_h), params.p_c * omega_h)),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_none() && self.admissions.is_none()
    }

    #[inline]
    pub fn ln_lik(&self, z: f64, h: f64, p: f64) -> f64 {
        let mut ll = 0.0;
        if let Some((lik, scale)) = &self.cases {
            ll += lik.ln_pmf(scale * z);
        }
        if let Some((lik, scale)) = &self.admissions {
            ll += lik.ln_pmf(scale * p * h);
        }
        ll
    }
}
