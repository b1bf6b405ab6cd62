//! Multi-chain posterior sampling for the trend model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::CountSeries;
use crate::stats::centred_moving_average;

use super::basis::SplineBasis;
use super::diagnostics::Diagnostics;
use super::model::{Parametrisation, TrendModel, TrendPriors, TrendState};
use super::nuts::{run_chain, ChainStats, LogDensity, NutsSettings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSettings {
    pub chains: usize,
    /// Warmup iterations per chain.
    pub warmup: usize,
    /// Post-warmup draws per chain.
    pub draws: usize,
    pub seed: u64,
    pub max_tree_depth: usize,
    pub target_accept: f64,
    /// Number of runs; each retry doubles warmup and draws.
    pub attempts: usize,
    /// Fixed coefficient coordinates. When unset the first attempt is centred
    /// and retries are non-centred.
    pub parametrisation: Option<Parametrisation>,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        SamplerSettings {
            chains: 4,
            warmup: 500,
            draws: 1000,
            seed: 1,
            max_tree_depth: 10,
            target_accept: 0.9,
            attempts: 2,
            parametrisation: None,
        }
    }
}

impl SamplerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.chains < 4 {
            return Err(Error::Parameter(format!("need at least 4 chains, got {}", self.chains)));
        }
        if self.chains * self.draws < 1000 {
            return Err(Error::Parameter(format!(
                "{} chains x {} draws gives fewer than 1000 post-warmup draws",
                self.chains, self.draws
            )));
        }
        if self.attempts == 0 {
            return Err(Error::Parameter("attempts must be at least 1".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Parameter(format!("target_accept must lie in (0, 1), got {}", self.target_accept)));
        }
        Ok(())
    }
}

/// Post-warmup draws from all chains.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    pub basis: SplineBasis,
    /// Draws in chain-major order.
    pub draws: Vec<TrendState>,
    /// Chain index of each draw.
    pub chain: Vec<usize>,
    pub diagnostics: Diagnostics,
}

impl PosteriorSamples {
    /// Wrap externally produced draws, for example from a CSV export.
    pub fn from_draws(basis: SplineBasis, draws: Vec<TrendState>, chain: Vec<usize>) -> Result<Self> {
        if draws.len() != chain.len() {
            return Err(Error::Parameter("draws and chain labels differ in length".into()));
        }
        let n = basis.n_basis();
        let dow = draws.first().is_some_and(|d| d.log_omega.is_some());
        for d in &draws {
            if d.b.len() != n {
                return Err(Error::Parameter(format!("draw has {} coefficients, basis has {n}", d.b.len())));
            }
            if d.log_omega.is_some() != dow {
                return Err(Error::Parameter("draws mix models with and without day-of-week effects".into()));
            }
        }
        Ok(PosteriorSamples { basis, draws, chain, diagnostics: Diagnostics::default() })
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn has_dow(&self) -> bool {
        self.draws.first().is_some_and(|d| d.log_omega.is_some())
    }

    pub fn tau(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.tau).collect()
    }

    pub fn k(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.k).collect()
    }
}

struct Target<'a>(&'a TrendModel);

impl LogDensity for Target<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn ln_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.0.ln_density_grad(x, grad)
    }
}

fn parameter_names(n_basis: usize, dow: bool) -> Vec<String> {
    let mut names: Vec<String> = (0..n_basis).map(|i| format!("b[{i}]")).collect();
    names.push("tau".into());
    names.push("k".into());
    if dow {
        names.extend((0..7).map(|i| format!("log_omega[{i}]")));
    }
    names
}

pub(crate) fn state_vector(state: &TrendState) -> Vec<f64> {
    let mut v = state.b.clone();
    v.push(state.tau);
    v.push(state.k);
    if let Some(lw) = &state.log_omega {
        v.extend_from_slice(lw);
    }
    v
}

/// Starting point: coefficients from the smoothed log counts at each
/// basis function's centre, with per-chain jitter.
fn initial_state<R: Rng + ?Sized>(series: &CountSeries, basis: &SplineBasis, dow: bool, rng: &mut R) -> TrendState {
    let counts: Vec<f64> = series.counts().iter().map(|&c| c as f64).collect();
    let smooth = centred_moving_average(&counts, 7);
    let last = (counts.len() - 1) as f64;
    let knots = basis.knots();
    let b = (0..basis.n_basis())
        .map(|i| {
            let t = knots[i + 2].clamp(0.0, last).round() as usize;
            (smooth[t] + 0.5).ln() + 0.1 * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    let tau = 0.1 * (rng.random::<f64>() - 0.5).exp();
    let k = 20.0 * (rng.random::<f64>() - 0.5).exp();
    let log_omega = dow.then(|| {
        let mut lw = [0.0; 7];
        for v in lw.iter_mut().take(6) {
            *v = 0.05 * rng.sample::<f64, _>(StandardNormal);
        }
        lw[6] = -lw[..6].iter().sum::<f64>();
        lw
    });
    TrendState { b, tau, k, log_omega }
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// Sample the trend posterior with `settings.chains` independent NUTS chains.
///
/// Returns [`Error::NonConvergence`] when split-R̂ or ESS fail for any
/// parameter after every attempt.
pub fn fit_pspline(
    series: &CountSeries,
    basis: &SplineBasis,
    priors: TrendPriors,
    settings: &SamplerSettings,
    dow: bool,
) -> Result<PosteriorSamples> {
    settings.validate()?;
    let base = TrendModel::new(series, basis, priors, dow)?;
    let names = parameter_names(base.n_basis(), dow);
    let mut last_diag = None;
    for attempt in 0..settings.attempts {
        let scale = 1usize << attempt;
        let coords = settings.parametrisation.unwrap_or(if attempt == 0 {
            Parametrisation::Centred
        } else {
            Parametrisation::NonCentred
        });
        let model = base.clone().with_parametrisation(coords);
        let nuts = NutsSettings {
            warmup: settings.warmup * scale,
            draws: settings.draws * scale,
            max_depth: settings.max_tree_depth,
            target_accept: settings.target_accept,
        };
        let seed = settings.seed.wrapping_add(attempt as u64);
        let outputs: Vec<Result<(Vec<TrendState>, ChainStats)>> = (0..settings.chains)
            .into_par_iter()
            .map(|c| {
                let mut rng = chain_rng(seed, c);
                let init = model.unconstrain(&initial_state(series, basis, dow, &mut rng));
                let out = run_chain(&Target(&model), &init, &nuts, &mut rng)?;
                let states = out.draws.iter().map(|x| model.constrain(x)).collect();
                Ok((states, out.stats))
            })
            .collect();
        let mut chains = Vec::with_capacity(settings.chains);
        let mut stats = Vec::with_capacity(settings.chains);
        for o in outputs {
            let (s, st) = o?;
            chains.push(s);
            stats.push(st);
        }
        let vectors: Vec<Vec<Vec<f64>>> =
            chains.iter().map(|c| c.iter().map(state_vector).collect()).collect();
        let diagnostics = Diagnostics::from_chains(&names, &vectors, &stats);
        log::info!("trend fit attempt {} ({coords:?}): {}", attempt + 1, diagnostics.summary());
        if diagnostics.converged() {
            let chain = chains.iter().enumerate().flat_map(|(c, d)| std::iter::repeat_n(c, d.len())).collect();
            let draws = chains.into_iter().flatten().collect();
            return Ok(PosteriorSamples { basis: basis.clone(), draws, chain, diagnostics });
        }
        last_diag = Some(diagnostics);
    }
    Err(Error::NonConvergence(Box::new(last_diag.unwrap_or_default())))
}
