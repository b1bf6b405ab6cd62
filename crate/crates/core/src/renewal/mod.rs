//! Renewal-equation particle filter and forecaster.
//!
//! ln R follows a Matérn 5/2 Gaussian process, infections a Poisson renewal
//! process, and reported cases and admissions are negative binomial around
//! delay-convolved infections. The filter resamples daily with a fixed lag
//! and forecasts by propagating particles past the origin date.

pub mod config;
pub mod export;
pub mod filter;
pub mod forecast;
pub mod gp;
pub mod model;

pub use config::{ForecastConfig, InitialLnRVariance};
pub use filter::{
    initial_chr, initialize, rt_summary, run_filter, systematic_resample, FilterData, FilterReport, ParticleEnsemble,
    RtSummary, RT_LEVELS,
};
pub use forecast::{forecast, ForecastResult, TargetForecast, FORECAST_LEVELS};
pub use gp::{gp_conditional, gp_step, matern52, GpKernel, GpPredictor};
pub use model::{
    chr_step, clamp_ln_r, convolve_observed, infection_pressure, observation_loglik, renewal_step, DayObservation,
    ObservationParams, LN_R_BOUNDS,
};
