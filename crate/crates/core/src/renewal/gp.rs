//! Matérn 5/2 Gaussian process on ln R and its one-step conditional.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpKernel {
    /// Signal standard deviation.
    pub s0: f64,
    /// Correlation time scale in days.
    pub l: f64,
    /// Observation noise standard deviation.
    pub sn: f64,
}

impl Default for GpKernel {
    fn default() -> Self {
        GpKernel { s0: 0.1, l: 30.0, sn: 0.001 }
    }
}

impl GpKernel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("s0", self.s0), ("l", self.l), ("sn", self.sn)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("kernel {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Marginal variance of a noisy observation, `s0^2 + sn^2`.
    pub fn stationary_variance(&self) -> f64 {
        self.s0 * self.s0 + self.sn * self.sn
    }
}

/// Matérn 5/2 covariance at separation `d` days.
pub fn matern52(d: f64, kernel: &GpKernel) -> f64 {
    let x = 5f64.sqrt() * d.abs() / kernel.l;
    kernel.s0 * kernel.s0 * (1.0 + x + x * x / 3.0) * (-x).exp()
}

fn cholesky_with_jitter(mut a: DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    for attempt in 0..3 {
        if let Some(c) = a.clone().cholesky() {
            return Ok(c);
        }
        if attempt < 2 {
            for i in 0..a.nrows() {
                a[(i, i)] += 1e-8;
            }
        }
    }
    Err(Error::Numerical("GP covariance is not positive definite after jitter".into()))
}

/// Conditional mean and variance of the next value given `history`
/// (oldest first, last element one day before the target), using only the
/// most recent `window` values.
pub fn gp_conditional(history: &[f64], kernel: &GpKernel, window: usize) -> Result<(f64, f64)> {
    let h = &history[history.len().saturating_sub(window)..];
    let n = h.len();
    let noise = kernel.sn * kernel.sn;
    if n == 0 {
        return Ok((0.0, kernel.stationary_variance()));
    }
    let k_mat = DMatrix::from_fn(n, n, |i, j| matern52(i as f64 - j as f64, kernel) + if i == j { noise } else { 0.0 });
    let k_star = DVector::from_fn(n, |j, _| matern52((n - j) as f64, kernel));
    let chol = cholesky_with_jitter(k_mat)?;
    let w = chol.solve(&k_star);
    let mean = w.dot(&DVector::from_column_slice(h));
    let var = kernel.stationary_variance() - k_star.dot(&w);
    Ok((mean, var.max(0.0)))
}

/// Draw the next ln R value given `history`.
pub fn gp_step<R: Rng + ?Sized>(history: &[f64], kernel: &GpKernel, window: usize, rng: &mut R) -> Result<f64> {
    let (mean, var) = gp_conditional(history, kernel, window)?;
    Ok(mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal))
}

/// Conditional weights and standard deviations for every history length up
/// to `window`, shared by all particles.
#[derive(Debug, Clone)]
pub struct GpPredictor {
    kernel: GpKernel,
    window: usize,
    /// `weights[n]` has length `n` (oldest first).
    weights: Vec<Vec<f64>>,
    sd: Vec<f64>,
}

impl GpPredictor {
    pub fn new(kernel: GpKernel, window: usize) -> Result<Self> {
        kernel.validate()?;
        if window == 0 {
            return Err(Error::Parameter("GP window must be at least one day".into()));
        }
        let noise = kernel.sn * kernel.sn;
        let mut weights = vec![Vec::new()];
        let mut sd = vec![kernel.stationary_variance().sqrt()];
        for n in 1..=window {
            let k_mat =
                DMatrix::from_fn(n, n, |i, j| matern52(i as f64 - j as f64, &kernel) + if i == j { noise } else { 0.0 });
            let k_star = DVector::from_fn(n, |j, _| matern52((n - j) as f64, &kernel));
            let w = cholesky_with_jitter(k_mat)?.solve(&k_star);
            let var = kernel.stationary_variance() - k_star.dot(&w);
            sd.push(var.max(0.0).sqrt());
            weights.push(w.as_slice().to_vec());
        }
        Ok(GpPredictor { kernel, window, weights, sd })
    }

    pub fn kernel(&self) -> &GpKernel {
        &self.kernel
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Conditional mean and standard deviation given `history`.
    #[inline]
    pub fn conditional(&self, history: &[f64]) -> (f64, f64) {
        let n = history.len().min(self.window);
        let h = &history[history.len() - n..];
        let mean = self.weights[n].iter().zip(h).map(|(w, x)| w * x).sum();
        (mean, self.sd[n])
    }

    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, history: &[f64], rng: &mut R) -> f64 {
        let (m, s) = self.conditional(history);
        m + s * rng.sample::<f64, _>(StandardNormal)
    }
}
