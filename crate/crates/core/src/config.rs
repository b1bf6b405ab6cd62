//! Run configuration.
//!
//! Every parameter has a compiled-in default; a TOML file overrides any
//! subset of sections. [`DEFAULT_CONFIG`] is the fully documented default
//! file and parses to [`RunConfig::default`].

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::delay::{discretize_gamma_with, DelaySpec, DiscretePmf, Discretisation};
use crate::error::{Error, Result};
use crate::pspline::SamplerSettings;
use crate::renewal::{ForecastConfig, GpKernel, InitialLnRVariance};
use crate::scoring::ScoreSettings;
use crate::series::{DayOfWeekEffects, Pathogen};
use crate::synth::{ChrTrajectory, RtTrajectory, ScenarioSpec};

/// The default configuration file, with every key written out.
pub const DEFAULT_CONFIG: &str = include_str!("default_config.toml");

/// Delay distributions for one pathogen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathogenDelays {
    pub generation: DelaySpec,
    /// Infection to reported case; absent for pathogens modelled on admissions only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<DelaySpec>,
    pub admission: DelaySpec,
}

impl PathogenDelays {
    pub fn defaults(pathogen: Pathogen) -> Self {
        let spec = |mean, sd, min_lag, max_lag| DelaySpec { mean, sd, min_lag, max_lag };
        match pathogen {
            Pathogen::SarsCov2 => PathogenDelays {
                generation: spec(3.3, 3.5, 1, 15),
                report: Some(spec(6.3, 3.1, 0, 25)),
                admission: spec(6.3, 3.7, 0, 25),
            },
            Pathogen::Influenza => PathogenDelays {
                generation: spec(2.6, 1.3, 1, 15),
                report: None,
                admission: spec(3.6, 2.1, 0, 25),
            },
            Pathogen::Rsv => PathogenDelays {
                generation: spec(7.5, 2.1, 1, 15),
                report: None,
                admission: spec(6.9, 2.7, 0, 25),
            },
        }
    }

    fn validate(&self) -> Result<()> {
        self.generation.validate()?;
        if self.generation.min_lag < 1 {
            return Err(Error::Config("generation interval min_lag must be 1".into()));
        }
        if let Some(r) = &self.report {
            r.validate()?;
        }
        self.admission.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathogenTable {
    #[serde(rename = "SARSCoV2")]
    pub sars_cov2: PathogenDelays,
    #[serde(rename = "Influenza")]
    pub influenza: PathogenDelays,
    #[serde(rename = "RSV")]
    pub rsv: PathogenDelays,
}

impl Default for PathogenTable {
    fn default() -> Self {
        PathogenTable {
            sars_cov2: PathogenDelays::defaults(Pathogen::SarsCov2),
            influenza: PathogenDelays::defaults(Pathogen::Influenza),
            rsv: PathogenDelays::defaults(Pathogen::Rsv),
        }
    }
}

impl PathogenTable {
    pub fn get(&self, pathogen: Pathogen) -> &PathogenDelays {
        match pathogen {
            Pathogen::SarsCov2 => &self.sars_cov2,
            Pathogen::Influenza => &self.influenza,
            Pathogen::Rsv => &self.rsv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationSettings {
    pub p_c: f64,
    /// Case dispersion; `inf` selects Poisson.
    pub k_c: f64,
    /// Admission dispersion; `inf` selects Poisson.
    pub k_h: f64,
}

impl Default for ObservationSettings {
    fn default() -> Self {
        ObservationSettings { p_c: 1.0, k_c: 25.0, k_h: 25.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSettings {
    pub particles: usize,
    pub lag: usize,
    pub horizon: usize,
    pub window: usize,
    pub max_history_days: usize,
    pub sigma_p: f64,
    pub p_cv: f64,
    pub chr_estimation_days: usize,
    pub dow_max_weeks: usize,
    pub initial_ln_r_variance: InitialLnRVariance,
    pub seed: u64,
}

impl Default for FilterSettings {
    fn default() -> Self {
        FilterSettings {
            particles: 100_000,
            lag: 42,
            horizon: 28,
            window: 120,
            max_history_days: 250,
            sigma_p: 0.01,
            p_cv: 0.025,
            chr_estimation_days: 21,
            dow_max_weeks: 16,
            initial_ln_r_variance: InitialLnRVariance::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrendSettings {
    pub window_days: usize,
    pub knot_spacing: usize,
    pub knot_extension: usize,
    pub day_of_week: bool,
    pub sampler: SamplerSettings,
}

impl Default for TrendSettings {
    fn default() -> Self {
        TrendSettings {
            window_days: 1095,
            knot_spacing: 5,
            knot_extension: 3,
            day_of_week: false,
            sampler: SamplerSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathSettings {
    /// Directory that relative output paths are resolved against.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub discretisation: Discretisation,
    pub pathogen: PathogenTable,
    pub gp: GpKernel,
    pub observation: ObservationSettings,
    pub filter: FilterSettings,
    pub trend: TrendSettings,
    pub scoring: ScoreSettings,
    pub paths: PathSettings,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Canonical serialisation; equal configs give equal strings.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        for p in Pathogen::ALL {
            self.pathogen.get(p).validate()?;
        }
        if self.pathogen.sars_cov2.report.is_none() {
            return Err(Error::Config("SARS-CoV-2 needs a report delay".into()));
        }
        self.trend.sampler.validate()?;
        if self.trend.window_days < 14 || self.trend.knot_spacing == 0 {
            return Err(Error::Config("trend window must be at least 14 days and knot spacing positive".into()));
        }
        if self.scoring.n_samples < 2 {
            return Err(Error::Config("scoring needs at least 2 samples".into()));
        }
        // Delays are validated above; this checks the remaining filter fields.
        let mut fc = ForecastConfig::new(DiscretePmf::point_mass(1), None, DiscretePmf::point_mass(0));
        self.apply_filter_settings(&mut fc);
        fc.validate()
    }

    pub fn delays(&self, pathogen: Pathogen) -> &PathogenDelays {
        self.pathogen.get(pathogen)
    }

    /// Discretised generation, report (if any) and admission PMFs.
    pub fn delay_pmfs(&self, pathogen: Pathogen) -> Result<(DiscretePmf, Option<DiscretePmf>, DiscretePmf)> {
        let d = self.delays(pathogen);
        let m = self.discretisation;
        Ok((
            discretize_gamma_with(&d.generation, m)?,
            d.report.as_ref().map(|r| discretize_gamma_with(r, m)).transpose()?,
            discretize_gamma_with(&d.admission, m)?,
        ))
    }

    fn apply_filter_settings(&self, fc: &mut ForecastConfig) {
        let f = &self.filter;
        fc.kernel = self.gp;
        fc.p_c = self.observation.p_c;
        fc.k_c = self.observation.k_c;
        fc.k_h = self.observation.k_h;
        fc.sigma_p = f.sigma_p;
        fc.p_cv = f.p_cv;
        fc.n_particles = f.particles;
        fc.lag = f.lag;
        fc.horizon = f.horizon;
        fc.window = f.window;
        fc.max_history_days = f.max_history_days;
        fc.chr_estimation_days = f.chr_estimation_days;
        fc.dow_max_weeks = f.dow_max_weeks;
        fc.initial_ln_r = f.initial_ln_r_variance;
        fc.seed = f.seed;
    }

    /// Filter configuration for `pathogen`. The report delay is included
    /// only when `with_cases` is set.
    pub fn forecast_config(&self, pathogen: Pathogen, with_cases: bool) -> Result<ForecastConfig> {
        let (gen, report, admit) = self.delay_pmfs(pathogen)?;
        let report = match (with_cases, report) {
            (false, _) => None,
            (true, Some(r)) => Some(r),
            (true, None) => {
                return Err(Error::Config(format!("{pathogen} has no report delay; cases cannot be modelled")));
            }
        };
        let mut fc = ForecastConfig::new(gen, report, admit);
        self.apply_filter_settings(&mut fc);
        fc.validate()?;
        Ok(fc)
    }
}

/// A synthetic-epidemic scenario as written in a scenario file. Delays and
/// unset observation parameters come from the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub pathogen: Pathogen,
    pub start_date: NaiveDate,
    pub length: usize,
    pub rt: RtTrajectory,
    pub seed_infections: f64,
    /// Generate reported cases; defaults to whether the pathogen has a report delay.
    #[serde(default)]
    pub cases: Option<bool>,
    #[serde(default)]
    pub dow_cases: Option<[f64; 7]>,
    #[serde(default)]
    pub dow_admissions: Option<[f64; 7]>,
    #[serde(default)]
    pub p_c: Option<f64>,
    #[serde(default)]
    pub k_c: Option<f64>,
    #[serde(default)]
    pub k_h: Option<f64>,
    pub chr: ChrTrajectory,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_spec(&self, run: &RunConfig) -> Result<ScenarioSpec> {
        let (gen_pmf, report, admit_pmf) = run.delay_pmfs(self.pathogen)?;
        let report_pmf = match (self.cases, report) {
            (Some(false), _) => None,
            (Some(true), None) => {
                return Err(Error::Config(format!("{} has no report delay; cannot simulate cases", self.pathogen)));
            }
            (_, r) => r,
        };
        let dow = |w: Option<[f64; 7]>| -> Result<Option<DayOfWeekEffects>> {
            match w {
                None => Ok(None),
                Some(omega) if omega.iter().all(|x| *x >= 0.0 && x.is_finite()) => {
                    Ok(Some(DayOfWeekEffects { omega, window_weeks: 0, degenerate: false }))
                }
                Some(_) => Err(Error::Config("day-of-week multipliers must be non-negative".into())),
            }
        };
        let spec = ScenarioSpec {
            pathogen: self.pathogen,
            start_date: self.start_date,
            length: self.length,
            rt: self.rt.clone(),
            seed_infections: self.seed_infections,
            gen_pmf,
            report_pmf,
            admit_pmf,
            dow_cases: dow(self.dow_cases)?,
            dow_admissions: dow(self.dow_admissions)?,
            p_c: self.p_c.unwrap_or(run.observation.p_c),
            k_c: self.k_c.unwrap_or(run.observation.k_c),
            k_h: self.k_h.unwrap_or(run.observation.k_h),
            chr: self.chr,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}
