//! Discretised gamma delay distributions.
//!
//! Generation intervals and infection-to-observation delays are described by
//! a mean and standard deviation in days. They are turned into probability
//! mass functions over integer lags `min_lag..=max_lag`, truncated and
//! renormalised so the masses sum to one.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};

/// Parameters of a truncated, discretised gamma delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySpec {
    pub mean: f64,
    pub sd: f64,
    pub min_lag: usize,
    pub max_lag: usize,
}

impl DelaySpec {
    pub fn new(mean: f64, sd: f64, min_lag: usize, max_lag: usize) -> Result<Self> {
        let spec = DelaySpec { mean, sd, min_lag, max_lag };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean.is_finite() && self.mean > 0.0) {
            return Err(Error::Parameter(format!("delay mean must be positive, got {}", self.mean)));
        }
        if !(self.sd.is_finite() && self.sd > 0.0) {
            return Err(Error::Parameter(format!("delay sd must be positive, got {}", self.sd)));
        }
        if self.min_lag > 1 {
            return Err(Error::Parameter(format!("min_lag must be 0 or 1, got {}", self.min_lag)));
        }
        if self.min_lag > self.max_lag || self.max_lag == 0 {
            return Err(Error::Parameter(format!(
                "need 1 <= max_lag and min_lag <= max_lag, got {}..{}",
                self.min_lag, self.max_lag
            )));
        }
        Ok(())
    }
}

/// How continuous mass is assigned to integer lags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discretisation {
    /// Cori et al. (2013): the gamma describes `delay - min_lag`, and lag `s`
    /// receives the density integrated against a unit triangular kernel
    /// centred on `s - min_lag`. Preserves the mean before truncation.
    #[default]
    Cori,
    /// Lag `s` receives the mass of `[s - 0.5, s + 0.5)`, the lowest bin
    /// starting at `max(min_lag - 0.5, 0)`.
    IntervalCensored,
}

/// Probability mass over consecutive integer lags starting at `min_lag`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePmf {
    min_lag: usize,
    probs: Vec<f64>,
}

impl DiscretePmf {
    /// Build from non-negative weights, normalising them to sum to one.
    pub fn from_weights(min_lag: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Parameter("a PMF needs at least one lag".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Parameter("PMF weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Numerical("PMF has no mass inside its truncation range".into()));
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        Ok(DiscretePmf { min_lag, probs })
    }

    pub fn point_mass(lag: usize) -> Self {
        DiscretePmf { min_lag: lag, probs: vec![1.0] }
    }

    pub fn min_lag(&self) -> usize {
        self.min_lag
    }

    pub fn max_lag(&self) -> usize {
        self.min_lag + self.probs.len() - 1
    }

    /// Masses for lags `min_lag..=max_lag`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Mass at `lag`, zero outside the support.
    pub fn prob(&self, lag: usize) -> f64 {
        lag.checked_sub(self.min_lag)
            .and_then(|i| self.probs.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs.iter().enumerate().map(move |(i, &p)| (self.min_lag + i, p))
    }

    /// Expected lag.
    pub fn mean(&self) -> f64 {
        self.iter().map(|(lag, p)| lag as f64 * p).sum()
    }

    /// Expected lag rounded to the nearest whole day, for index shifts.
    pub fn mean_rounded(&self) -> usize {
        self.mean().round() as usize
    }
}

/// Expected lag of a PMF.
pub fn pmf_mean(p: &DiscretePmf) -> f64 {
    p.mean()
}

fn gamma_params(mean: f64, sd: f64) -> Result<(f64, f64)> {
    let shape = (mean / sd).powi(2);
    let scale = sd * sd / mean;
    if !(shape.is_finite() && shape > 0.0 && scale.is_finite() && scale > 0.0) {
        return Err(Error::Parameter(format!(
            "gamma parameters not finite for mean {mean}, sd {sd}"
        )));
    }
    Ok((shape, scale))
}

/// Discretise with the default (Cori) method.
pub fn discretize_gamma(spec: &DelaySpec) -> Result<DiscretePmf> {
    discretize_gamma_with(spec, Discretisation::default())
}

pub fn discretize_gamma_with(spec: &DelaySpec, method: Discretisation) -> Result<DiscretePmf> {
    spec.validate()?;
    let weights = match method {
        Discretisation::Cori => {
            let shifted_mean = spec.mean - spec.min_lag as f64;
            if shifted_mean <= 0.0 {
                return Err(Error::Parameter(format!(
                    "mean {} must exceed the minimum lag {}",
                    spec.mean, spec.min_lag
                )));
            }
            let (shape, scale) = gamma_params(shifted_mean, spec.sd)?;
            // Integral of the CDF from 0 to x.
            let cdf_integral = |x: f64| {
                if x <= 0.0 {
                    0.0
                } else {
                    x * gamma_lr(shape, x / scale) - shifted_mean * gamma_lr(shape + 1.0, x / scale)
                }
            };
            (spec.min_lag..=spec.max_lag)
                .map(|lag| {
                    let j = (lag - spec.min_lag) as f64;
                    let w = cdf_integral(j + 1.0) - 2.0 * cdf_integral(j) + cdf_integral(j - 1.0);
                    w.max(0.0)
                })
                .collect()
        }
        Discretisation::IntervalCensored => {
            let (shape, scale) = gamma_params(spec.mean, spec.sd)?;
            let cdf = |x: f64| if x <= 0.0 { 0.0 } else { gamma_lr(shape, x / scale) };
            (spec.min_lag..=spec.max_lag)
                .map(|lag| {
                    let lo = (lag as f64 - 0.5).max(0.0);
                    (cdf(lag as f64 + 0.5) - cdf(lo)).max(0.0)
                })
                .collect()
        }
    };
    DiscretePmf::from_weights(spec.min_lag, weights)
}

/// Mean and standard deviation of a delay in days.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn new(mean: f64, sd: f64) -> Self {
        MeanSd { mean, sd }
    }
}

/// Moments of the sum of two independent delays: means and variances add.
pub fn convolve_delays(a: MeanSd, b: MeanSd) -> Result<MeanSd> {
    for (name, v) in [("a.mean", a.mean), ("a.sd", a.sd), ("b.mean", b.mean), ("b.sd", b.sd)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Parameter(format!("{name} must be finite and non-negative, got {v}")));
        }
    }
    Ok(MeanSd { mean: a.mean + b.mean, sd: a.sd.hypot(b.sd) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sars_generation_interval_shape() {
        let pmf = discretize_gamma(&DelaySpec::new(3.3, 3.5, 1, 15).unwrap()).unwrap();
        assert_eq!(pmf.probs().len(), 15);
        assert_eq!(pmf.min_lag(), 1);
        assert!((pmf.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(pmf.prob(0), 0.0);
    }

    #[test]
    fn near_degenerate_interval_censored() {
        let spec = DelaySpec::new(5.0, 0.01, 0, 25).unwrap();
        let pmf = discretize_gamma_with(&spec, Discretisation::IntervalCensored).unwrap();
        assert!(pmf.prob(5) >= 0.999);
    }

    #[test]
    fn near_degenerate_cori_spreads_by_mean_absolute_deviation() {
        // Triangular kernel at lag 5 collects 1 - E|X - 5| ~ 1 - sd * sqrt(2 / pi).
        let spec = DelaySpec::new(5.0, 0.01, 0, 25).unwrap();
        let pmf = discretize_gamma(&spec).unwrap();
        let expected = 1.0 - 0.01 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((pmf.prob(5) - expected).abs() < 1e-4, "{}", pmf.prob(5));
        assert!((pmf.mean() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn point_and_uniform_means() {
        assert_eq!(pmf_mean(&DiscretePmf::point_mass(4)), 4.0);
        let u = DiscretePmf::from_weights(1, vec![1.0, 1.0, 1.0]).unwrap();
        assert!((pmf_mean(&u) - 2.0).abs() < 1e-15);
        assert_eq!(u.mean_rounded(), 2);
    }

    #[test]
    fn invalid_specs() {
        assert!(DelaySpec::new(0.0, 1.0, 0, 10).is_err());
        assert!(DelaySpec::new(1.0, -1.0, 0, 10).is_err());
        assert!(DelaySpec::new(1.0, 1.0, 2, 10).is_err());
        let spec = DelaySpec { mean: 0.5, sd: 1.0, min_lag: 1, max_lag: 10 };
        assert!(discretize_gamma(&spec).is_err());
    }

    #[test]
    fn convolution_moments() {
        let id = convolve_delays(MeanSd::new(3.0, 2.0), MeanSd::new(0.0, 0.0)).unwrap();
        assert_eq!((id.mean, id.sd), (3.0, 2.0));
        let s = convolve_delays(MeanSd::new(2.0, 1.0), MeanSd::new(4.0, 2.0)).unwrap();
        assert_eq!(s.mean, 6.0);
        assert!((s.sd - 5f64.sqrt()).abs() < 1e-15);
        assert!(convolve_delays(MeanSd::new(-1.0, 1.0), MeanSd::new(1.0, 1.0)).is_err());
    }
}
