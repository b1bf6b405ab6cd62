//! Trend estimation, forecasting and scoring for daily respiratory-disease
//! surveillance counts.
//!
//! * [`series`] and [`io`]: daily count series, data rounds, day-of-week effects.
//! * [`delay`]: discretised gamma generation intervals and reporting delays.
//! * [`pspline`]: Bayesian P-spline trends with growth rates and doubling times.
//! * [`renewal`]: a renewal-equation particle filter and 28-day forecasts.
//! * [`scoring`]: CRPS on log-transformed counts.
//! * [`synth`]: synthetic epidemics drawn from the forecasting model itself.
//! * [`config`]: run configuration with the published parameter defaults.

pub mod config;
pub mod delay;
pub mod dist;
pub mod error;
pub mod io;
pub mod pspline;
pub mod renewal;
pub mod scoring;
pub mod series;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/data.md")]
    struct Data;
    #[doc = include_str!("../../../book/src/delays.md")]
    struct Delays;
    #[doc = include_str!("../../../book/src/trends.md")]
    struct Trends;
    #[doc = include_str!("../../../book/src/filter.md")]
    struct Filter;
    #[doc = include_str!("../../../book/src/scoring.md")]
    struct Scoring;
    #[doc = include_str!("../../../book/src/simulation.md")]
    struct Simulation;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
