//! Count distributions parameterised by mean and dispersion.
//!
//! `NegBin(m, k)` has variance `m + m^2 / k`. A dispersion of `f64::INFINITY`
//! selects the Poisson limit.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use statrs::function::gamma::ln_gamma;

pub fn ln_factorial(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// Poisson log-pmf; `mean = 0` puts all mass on zero.
pub fn poisson_ln_pmf(y: u64, mean: f64) -> f64 {
    if mean <= 0.0 {
        return if y == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    y as f64 * mean.ln() - mean - ln_factorial(y)
}

/// Negative-binomial log-pmf with mean `mean` and dispersion `k`.
pub fn negbin_ln_pmf(y: u64, mean: f64, k: f64) -> f64 {
    if k.is_infinite() {
        return poisson_ln_pmf(y, mean);
    }
    if mean <= 0.0 {
        return if y == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let yf = y as f64;
    ln_gamma(yf + k) - ln_gamma(k) - ln_factorial(y) + k * (k / (k + mean)).ln() + yf * (mean / (k + mean)).ln()
}

/// Log-pmf for a fixed observation and dispersion, with the mean-free part
/// computed once. Used where one observation is scored against many means.
#[derive(Debug, Clone, Copy)]
pub struct CountLikelihood {
    y: u64,
    k: f64,
    constant: f64,
}

impl CountLikelihood {
    pub fn new(y: u64, k: f64) -> Self {
        let constant = if k.is_infinite() {
            -ln_factorial(y)
        } else {
            ln_gamma(y as f64 + k) - ln_gamma(k) - ln_factorial(y)
        };
        CountLikelihood { y, k, constant }
    }

    #[inline]
    pub fn ln_pmf(&self, mean: f64) -> f64 {
        if mean <= 0.0 {
            return if self.y == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        let yf = self.y as f64;
        if self.k.is_infinite() {
            self.constant + yf * mean.ln() - mean
        } else {
            let denom = (self.k + mean).ln();
            self.constant + self.k * (self.k.ln() - denom) + yf * (mean.ln() - denom)
        }
    }
}

/// Draw from Poisson(mean); zero or non-finite means give 0.
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if !(mean > 0.0) || !mean.is_finite() {
        return 0;
    }
    // rand_distr caps the mean; beyond that the normal approximation is exact to print precision.
    if mean > 1e15 {
        return mean.round() as u64;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

/// Draw from NegBin(mean, k) as a gamma–Poisson mixture.
pub fn sample_negbin<R: Rng + ?Sized>(rng: &mut R, mean: f64, k: f64) -> u64 {
    if k.is_infinite() {
        return sample_poisson(rng, mean);
    }
    if !(mean > 0.0) {
        return 0;
    }
    let rate = match Gamma::new(k, mean / k) {
        Ok(g) => g.sample(rng),
        Err(_) => return 0,
    };
    sample_poisson(rng, rate)
}
