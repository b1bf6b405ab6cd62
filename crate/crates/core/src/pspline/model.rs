//! Log-posterior of the P-spline trend model.
//!
//! `log E[C(t)] = s(t) = sum_i b_i B_i(t)` with a second-order random-walk
//! prior `b_i - 2 b_{i-1} + b_{i-2} ~ N(0, tau^2)` and
//! `C(t) ~ NegBin(e^{s(t)} w(t), k)`, where `w(t)` is an optional
//! multiplicative day-of-week effect.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::dist::ln_factorial;
use crate::error::{Error, Result};
use crate::series::{weekday_index, CountSeries};

use super::basis::{LocalBasis, SplineBasis};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Prior on a positive scale parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalePrior {
    /// Uniform on `(0, upper)`.
    FlatPositive { upper: f64 },
    Normal { mean: f64, sd: f64 },
}

impl ScalePrior {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ScalePrior::FlatPositive { upper } if !(upper > 0.0 && upper.is_finite()) => {
                Err(Error::Parameter(format!("flat prior upper bound must be positive, got {upper}")))
            }
            ScalePrior::Normal { sd, mean } if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) => {
                Err(Error::Parameter(format!("normal prior needs finite mean and sd > 0, got ({mean}, {sd})")))
            }
            _ => Ok(()),
        }
    }

    /// Log density at `v` and its derivative.
    fn ln_density(&self, v: f64) -> (f64, f64) {
        if !(v > 0.0) {
            return (f64::NEG_INFINITY, 0.0);
        }
        match *self {
            ScalePrior::FlatPositive { upper } => {
                if v < upper {
                    (-upper.ln(), 0.0)
                } else {
                    (f64::NEG_INFINITY, 0.0)
                }
            }
            ScalePrior::Normal { mean, sd } => {
                let z = (v - mean) / sd;
                (-0.5 * z * z - sd.ln() - LN_SQRT_2PI, -z / sd)
            }
        }
    }

    /// Map an unconstrained value onto the support.
    ///
    /// Returns `(value, d value / dx, log |jacobian|, d log|jacobian| / dx)`.
    fn transform(&self, x: f64) -> (f64, f64, f64, f64) {
        match *self {
            ScalePrior::FlatPositive { upper } => {
                let sig = sigmoid(x);
                let v = upper * sig;
                let ln_jac = upper.ln() + ln_sigmoid(x) + ln_sigmoid(-x);
                (v, v * (1.0 - sig), ln_jac, 1.0 - 2.0 * sig)
            }
            ScalePrior::Normal { .. } => {
                let v = x.exp();
                (v, v, x, 1.0)
            }
        }
    }

    fn inverse(&self, v: f64) -> f64 {
        match *self {
            ScalePrior::FlatPositive { upper } => {
                let p = (v / upper).clamp(1e-12, 1.0 - 1e-12);
                (p / (1.0 - p)).ln()
            }
            ScalePrior::Normal { .. } => v.ln(),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn ln_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Priors on the random-walk scale `tau` and the dispersion `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendPriors {
    pub tau: ScalePrior,
    pub k: ScalePrior,
}

impl TrendPriors {
    /// Flat on `(0, 1e3)` for tau and `(0, 1e4)` for k.
    pub fn uninformative() -> Self {
        TrendPriors {
            tau: ScalePrior::FlatPositive { upper: 1e3 },
            k: ScalePrior::FlatPositive { upper: 1e4 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tau.validate()?;
        self.k.validate()
    }
}

impl Default for TrendPriors {
    fn default() -> Self {
        Self::uninformative()
    }
}

/// One point in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendState {
    pub b: Vec<f64>,
    pub tau: f64,
    pub k: f64,
    /// Log day-of-week multipliers, Monday first, summing to zero.
    pub log_omega: Option<[f64; 7]>,
}

/// Sum over `i >= 2` (zero-based) of `log N(b_i - 2 b_{i-1} + b_{i-2} | 0, tau^2)`.
pub fn rw2_ln_density(b: &[f64], tau: f64) -> f64 {
    if !(tau > 0.0) {
        return f64::NEG_INFINITY;
    }
    b.windows(3)
        .map(|w| {
            let u = w[2] - 2.0 * w[1] + w[0];
            -LN_SQRT_2PI - tau.ln() - 0.5 * (u / tau).powi(2)
        })
        .sum()
}

/// Coordinates the sampler moves in for the spline coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parametrisation {
    /// The coefficients themselves.
    #[default]
    Centred,
    /// Level and slope of the least-squares line through the coefficients,
    /// then standardised second differences `z_i = (b_i - 2 b_{i-1} + b_{i-2}) / tau`.
    NonCentred,
}

/// Mean and least-squares slope of `v` against its index.
fn linear_fit(v: &[f64]) -> (f64, f64) {
    let c = (v.len() - 1) as f64 / 2.0;
    let ss: f64 = (0..v.len()).map(|i| (i as f64 - c).powi(2)).sum();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let slope = v.iter().enumerate().map(|(i, x)| x * (i as f64 - c)).sum::<f64>() / ss;
    (mean, slope)
}

fn remove_linear(v: &mut [f64]) {
    let (mean, slope) = linear_fit(v);
    let c = (v.len() - 1) as f64 / 2.0;
    v.iter_mut().enumerate().for_each(|(i, x)| *x -= mean + slope * (i as f64 - c));
}

/// Sequence with `w_0 = w_1 = 0` and second differences `z[2..]`.
fn integrate_twice(z: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; z.len()];
    for i in 2..z.len() {
        w[i] = 2.0 * w[i - 1] - w[i - 2] + z[i];
    }
    w
}

/// The fitted model: data, basis design and priors.
#[derive(Debug, Clone)]
pub struct TrendModel {
    parametrisation: Parametrisation,
    design: Vec<LocalBasis>,
    counts: Vec<u64>,
    ln_fact: Vec<f64>,
    weekday: Vec<usize>,
    n_basis: usize,
    dow: bool,
    priors: TrendPriors,
}

impl TrendModel {
    pub fn new(series: &CountSeries, basis: &SplineBasis, priors: TrendPriors, dow: bool) -> Result<Self> {
        priors.validate()?;
        if series.len() != basis.n_days() || series.start_date() != basis.start_date() {
            return Err(Error::Parameter(format!(
                "series ({} days from {}) does not match basis ({} days from {})",
                series.len(),
                series.start_date(),
                basis.n_days(),
                basis.start_date()
            )));
        }
        Ok(TrendModel {
            parametrisation: Parametrisation::default(),
            design: basis.daily_design(),
            counts: series.counts().to_vec(),
            ln_fact: series.counts().iter().map(|&c| ln_factorial(c)).collect(),
            weekday: (0..series.len()).map(|d| weekday_index(series.date_of(d))).collect(),
            n_basis: basis.n_basis(),
            dow,
            priors,
        })
    }

    pub fn with_parametrisation(mut self, p: Parametrisation) -> Self {
        self.parametrisation = p;
        self
    }

    pub fn parametrisation(&self) -> Parametrisation {
        self.parametrisation
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    fn coefficients(&self, x: &[f64], tau: f64) -> Vec<f64> {
        let n = self.n_basis;
        match self.parametrisation {
            Parametrisation::Centred => x[..n].to_vec(),
            Parametrisation::NonCentred => {
                let mut w = integrate_twice(&x[..n]);
                remove_linear(&mut w);
                let c = (n - 1) as f64 / 2.0;
                w.iter().enumerate().map(|(i, wi)| x[0] + x[1] * (i as f64 - c) + tau * wi).collect()
            }
        }
    }

    pub fn has_dow(&self) -> bool {
        self.dow
    }

    pub fn priors(&self) -> &TrendPriors {
        &self.priors
    }

    /// Length of the unconstrained parameter vector.
    pub fn dim(&self) -> usize {
        self.n_basis + 2 + if self.dow { 6 } else { 0 }
    }

    /// Joint log density at a constrained state.
    pub fn log_posterior(&self, state: &TrendState) -> f64 {
        if state.b.len() != self.n_basis || state.log_omega.is_some() != self.dow {
            return f64::NAN;
        }
        if !(state.tau > 0.0 && state.k > 0.0) {
            return f64::NEG_INFINITY;
        }
        let k = state.k;
        let ln_gamma_k = ln_gamma(k);
        let mut lp = 0.0;
        for (t, loc) in self.design.iter().enumerate() {
            let mut s = loc.dot(&state.b);
            if let Some(lw) = &state.log_omega {
                s += lw[self.weekday[t]];
            }
            let y = self.counts[t] as f64;
            let m = s.exp();
            let ln_km = (k + m).ln();
            lp += ln_gamma(y + k) - ln_gamma_k - self.ln_fact[t] + k * (k.ln() - ln_km) + y * (s - ln_km);
        }
        lp += rw2_ln_density(&state.b, state.tau);
        lp += self.priors.tau.ln_density(state.tau).0;
        lp += self.priors.k.ln_density(state.k).0;
        if let Some(lw) = &state.log_omega {
            lp += lw[..6].iter().map(|z| -0.5 * z * z - LN_SQRT_2PI).sum::<f64>();
        }
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    }

    /// Map an unconstrained vector to a state.
    pub fn constrain(&self, x: &[f64]) -> TrendState {
        let n = self.n_basis;
        let tau = self.priors.tau.transform(x[n]).0;
        let k = self.priors.k.transform(x[n + 1]).0;
        let log_omega = self.dow.then(|| {
            let mut lw = [0.0; 7];
            lw[..6].copy_from_slice(&x[n + 2..n + 8]);
            lw[6] = -lw[..6].iter().sum::<f64>();
            lw
        });
        TrendState { b: self.coefficients(x, tau), tau, k, log_omega }
    }

    pub fn unconstrain(&self, state: &TrendState) -> Vec<f64> {
        let mut x = state.b.clone();
        if self.parametrisation == Parametrisation::NonCentred {
            for i in 2..x.len() {
                x[i] = (state.b[i] - 2.0 * state.b[i - 1] + state.b[i - 2]) / state.tau;
            }
            (x[0], x[1]) = linear_fit(&state.b);
        }
        x.push(self.priors.tau.inverse(state.tau));
        x.push(self.priors.k.inverse(state.k));
        if let Some(lw) = &state.log_omega {
            x.extend_from_slice(&lw[..6]);
        }
        x
    }

    /// Log density of the unconstrained vector (posterior plus log-Jacobian)
    /// and its gradient.
    pub fn ln_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.n_basis;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (tau, dtau_dx, ljac_tau, dljac_tau) = self.priors.tau.transform(x[n]);
        let (k, dk_dx, ljac_k, dljac_k) = self.priors.k.transform(x[n + 1]);
        if !(tau > 0.0 && k > 0.0 && tau.is_finite() && k.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let coefs = self.coefficients(x, tau);
        let b = &coefs[..];
        let mut log_omega = [0.0; 7];
        if self.dow {
            log_omega[..6].copy_from_slice(&x[n + 2..n + 8]);
            log_omega[6] = -log_omega[..6].iter().sum::<f64>();
        }
        let mut d_lw = [0.0; 7];

        let ln_k = k.ln();
        let ln_gamma_k = ln_gamma(k);
        let digamma_k = digamma(k);
        let mut lp = 0.0;
        let mut d_k = 0.0;
        for (t, loc) in self.design.iter().enumerate() {
            let wd = self.weekday[t];
            let s = loc.dot(b) + log_omega[wd];
            if s > 700.0 {
                return f64::NEG_INFINITY;
            }
            let y = self.counts[t] as f64;
            let m = s.exp();
            let ln_km = (k + m).ln();
            lp += ln_gamma(y + k) - ln_gamma_k - self.ln_fact[t] + k * (ln_k - ln_km) + y * (s - ln_km);
            let d_s = y - (y + k) * m / (k + m);
            for (j, v) in loc.values.iter().enumerate() {
                grad[loc.first + j] += d_s * v;
            }
            d_lw[wd] += d_s;
            d_k += digamma(y + k) - digamma_k + ln_k - ln_km + (m - y) / (k + m);
        }

        let mut d_tau = 0.0;
        match self.parametrisation {
            Parametrisation::Centred => {
                let inv_tau2 = 1.0 / (tau * tau);
                for i in 2..n {
                    let u = b[i] - 2.0 * b[i - 1] + b[i - 2];
                    lp += -LN_SQRT_2PI - tau.ln() - 0.5 * u * u * inv_tau2;
                    let g = -u * inv_tau2;
                    grad[i] += g;
                    grad[i - 1] -= 2.0 * g;
                    grad[i - 2] += g;
                    d_tau += -1.0 / tau + u * u * inv_tau2 / tau;
                }
            }
            Parametrisation::NonCentred => {
                // b = x_0 + x_1 (i - c) + tau (I - P) w(z), with P the projection onto lines.
                let c = (n - 1) as f64 / 2.0;
                let g_level: f64 = grad[..n].iter().sum();
                let g_slope: f64 = grad[..n].iter().enumerate().map(|(i, g)| g * (i as f64 - c)).sum();
                let mut g = grad[..n].to_vec();
                remove_linear(&mut g);
                let w = integrate_twice(&x[..n]);
                d_tau += g.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
                let (mut a1, mut a2) = (0.0, 0.0);
                for i in (2..n).rev() {
                    let a = g[i] + 2.0 * a1 - a2;
                    a2 = a1;
                    a1 = a;
                    let z = x[i];
                    lp += -0.5 * z * z - LN_SQRT_2PI;
                    grad[i] = tau * a - z;
                }
                grad[0] = g_level;
                grad[1] = g_slope;
            }
        }

        let (lp_tau, dlp_tau) = self.priors.tau.ln_density(tau);
        let (lp_k, dlp_k) = self.priors.k.ln_density(k);
        lp += lp_tau + lp_k + ljac_tau + ljac_k;
        grad[n] = (d_tau + dlp_tau) * dtau_dx + dljac_tau;
        grad[n + 1] = (d_k + dlp_k) * dk_dx + dljac_k;

        if self.dow {
            for j in 0..6 {
                let z = log_omega[j];
                lp += -0.5 * z * z - LN_SQRT_2PI;
                grad[n + 2 + j] = d_lw[j] - d_lw[6] - z;
            }
        }
        if lp.is_finite() && grad.iter().all(|g| g.is_finite()) {
            lp
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Log-posterior of `state` for `series` under `basis` and `priors`.
///
/// Day-of-week effects are included when `state.log_omega` is present.
pub fn log_posterior(state: &TrendState, series: &CountSeries, basis: &SplineBasis, priors: &TrendPriors) -> Result<f64> {
    let model = TrendModel::new(series, basis, *priors, state.log_omega.is_some())?;
    if state.b.len() != model.n_basis() {
        return Err(Error::Parameter(format!(
            "state has {} coefficients, basis has {}",
            state.b.len(),
            model.n_basis()
        )));
    }
    Ok(model.log_posterior(state))
}
