use serde::{Deserialize, Serialize};

use crate::delay::DiscretePmf;
use crate::error::{Error, Result};

use super::gp::GpKernel;
use super::model::ObservationParams;

/// Variance of the initial ln R draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialLnRVariance {
    /// `s0^2 + sn^2`, the marginal variance of the process.
    Stationary,
    /// `sn^2` only.
    #[default]
    ObservationNoise,
}

/// Everything the particle filter needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastConfig {
    pub gen_pmf: DiscretePmf,
    /// Infection-to-report delay; required when cases are supplied.
    pub report_pmf: Option<DiscretePmf>,
    pub admit_pmf: DiscretePmf,
    pub kernel: GpKernel,
    pub p_c: f64,
    /// Case dispersion; `f64::INFINITY` selects Poisson.
    pub k_c: f64,
    /// Admission dispersion; `f64::INFINITY` selects Poisson.
    pub k_h: f64,
    /// Daily step sd of the ln case–hospitalisation ratio.
    pub sigma_p: f64,
    /// Coefficient of variation of the initial case–hospitalisation ratio.
    pub p_cv: f64,
    pub n_particles: usize,
    /// Days of history rewritten by each resampling step.
    pub lag: usize,
    pub horizon: usize,
    /// Days of ln R history the GP conditions on.
    pub window: usize,
    /// Longest run-in before the origin date.
    pub max_history_days: usize,
    /// Days at the start used to estimate the initial case–hospitalisation ratio.
    pub chr_estimation_days: usize,
    /// Maximum weeks for the day-of-week estimator.
    pub dow_max_weeks: usize,
    pub initial_ln_r: InitialLnRVariance,
    pub seed: u64,
}

impl ForecastConfig {
    /// Defaults for the given delays.
    pub fn new(gen_pmf: DiscretePmf, report_pmf: Option<DiscretePmf>, admit_pmf: DiscretePmf) -> Self {
        ForecastConfig {
            gen_pmf,
            report_pmf,
            admit_pmf,
            kernel: GpKernel::default(),
            p_c: 1.0,
            k_c: 25.0,
            k_h: 25.0,
            sigma_p: 0.01,
            p_cv: 0.025,
            n_particles: 100_000,
            lag: 42,
            horizon: 28,
            window: 120,
            max_history_days: 250,
            chr_estimation_days: 21,
            dow_max_weeks: 16,
            initial_ln_r: InitialLnRVariance::default(),
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if self.gen_pmf.min_lag() < 1 {
            return Err(Error::Parameter("generation interval must start at lag 1 or later".into()));
        }
        if self.n_particles < 1000 {
            return Err(Error::Parameter(format!("need at least 1000 particles, got {}", self.n_particles)));
        }
        if self.lag < 1 {
            return Err(Error::Parameter("resampling lag must be at least one day".into()));
        }
        if self.window < 1 {
            return Err(Error::Parameter("GP window must be at least one day".into()));
        }
        if !(self.p_c > 0.0 && self.p_c <= 1.0) {
            return Err(Error::Parameter(format!("p_c must lie in (0, 1], got {}", self.p_c)));
        }
        for (name, k) in [("k_c", self.k_c), ("k_h", self.k_h)] {
            if !(k > 0.0) {
                return Err(Error::Parameter(format!("{name} must be positive or infinite, got {k}")));
            }
        }
        if !(self.sigma_p >= 0.0 && self.sigma_p.is_finite()) {
            return Err(Error::Parameter(format!("sigma_p must be non-negative, got {}", self.sigma_p)));
        }
        if !(self.p_cv > 0.0 && self.p_cv.is_finite()) {
            return Err(Error::Parameter(format!("P_CV must be positive, got {}", self.p_cv)));
        }
        if self.chr_estimation_days == 0 || self.dow_max_weeks == 0 || self.dow_max_weeks > 16 {
            return Err(Error::Parameter("chr_estimation_days must be positive and dow_max_weeks in 1..=16".into()));
        }
        Ok(())
    }

    /// Length of the initialisation period: the longest delay or generation interval.
    pub fn t_init(&self) -> usize {
        let mut t = self.gen_pmf.max_lag().max(self.admit_pmf.max_lag());
        if let Some(r) = &self.report_pmf {
            t = t.max(r.max_lag());
        }
        t
    }

    pub fn observation_params(&self) -> ObservationParams {
        ObservationParams { p_c: self.p_c, k_c: self.k_c, k_h: self.k_h }
    }

    pub fn initial_ln_r_variance(&self) -> f64 {
        match self.initial_ln_r {
            InitialLnRVariance::Stationary => self.kernel.stationary_variance(),
            InitialLnRVariance::ObservationNoise => self.kernel.sn * self.kernel.sn,
        }
    }
}
