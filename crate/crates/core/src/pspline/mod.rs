//! Bayesian P-spline trend estimation.
//!
//! The log expected daily count is a cubic B-spline whose coefficients follow
//! a second-order random walk. Counts are negative binomial around that trend,
//! optionally scaled by day-of-week multipliers. The posterior is sampled with
//! NUTS and summarised as growth rates, doubling times and the probability of
//! growth.

pub mod basis;
pub mod diagnostics;
pub mod export;
pub mod fit;
pub mod model;
pub mod nuts;
pub mod summary;

pub use basis::{build_basis, LocalBasis, SplineBasis};
pub use diagnostics::{ess, split_rhat, Diagnostics, ParamDiagnostic};
pub use export::{read_posterior, read_trend_summary, write_posterior, write_trend_summary};
pub use fit::{fit_pspline, PosteriorSamples, SamplerSettings};
pub use model::{log_posterior, rw2_ln_density, Parametrisation, ScalePrior, TrendModel, TrendPriors, TrendState};
pub use summary::{
    derive_informative_priors, doubling_time, growth_rate, growth_rate_at, informative_priors, log_trend,
    summarise_trend, DaySummary, TrendSummary, SUMMARY_LEVELS,
};
