use respicast::io::read_counts_file;
use respicast::renewal::export::{write_ess, write_forecast_quantiles, write_forecast_samples, write_rt};
use respicast::renewal::{forecast, initialize, rt_summary, run_filter, FilterData};
use respicast::series::Stream;
use serde_json::json;

use super::{create, ensure_dir, LoadedConfig};
use crate::error::{CliError, CliResult};
use crate::ForecastArgs;

/// Particles written per day to the sample file.
pub const EXPORTED_SAMPLES: usize = 2000;

pub fn run(cfg: &LoadedConfig, args: &ForecastArgs) -> CliResult<()> {
    if args.cases.is_none() && args.admissions.is_none() {
        return Err(CliError::Usage("need --cases, --admissions or both".into()));
    }
    let mut config = cfg
        .config
        .forecast_config(args.pathogen, args.cases.is_some())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(h) = args.horizon {
        config.horizon = h;
    }
    if let Some(n) = args.particles {
        config.n_particles = n;
    }
    if let Some(l) = args.lag {
        config.lag = l;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if config.horizon == 0 {
        return Err(CliError::Usage("--horizon must be at least 1".into()));
    }

    let mut manifest = cfg.manifest("forecast", config.seed)?;
    let mut read = |role: &str, path: &Option<std::path::PathBuf>, stream| -> CliResult<_> {
        match path {
            Some(p) => {
                manifest.input(role, p)?;
                Ok(Some(read_counts_file(p, args.pathogen, stream)?))
            }
            None => Ok(None),
        }
    };
    let cases = read("cases", &args.cases, Stream::Cases)?;
    let admissions = read("admissions", &args.admissions, Stream::Admissions)?;
    let origin = match args.origin_date {
        Some(d) => d,
        None => cases.iter().chain(admissions.iter()).map(|s| s.origin_date()).min().expect("at least one series"),
    };

    let data = FilterData::new(cases.as_ref(), admissions.as_ref(), origin, &config)?;
    log::info!(
        "filtering {} from {} to {} with {} particles",
        args.pathogen,
        data.start_date(),
        origin,
        config.n_particles
    );
    let mut ensemble = initialize(&data, &config)?;
    let report = run_filter(&mut ensemble, &data)?;
    let min_ess = report.ess.iter().copied().fold(f64::INFINITY, f64::min);
    log::info!("filter done: log-likelihood {:.3}, minimum ESS {:.1}", report.log_likelihood, min_ess);
    let result = forecast(&ensemble, config.horizon)?;

    ensure_dir(&args.output)?;
    let out = |name: &str| args.output.join(name);
    let path = out("forecast_quantiles.csv");
    write_forecast_quantiles(&result, create(&path)?)?;
    manifest.output(&path)?;
    let path = out("forecast_samples.csv");
    write_forecast_samples(&result, EXPORTED_SAMPLES, create(&path)?)?;
    manifest.output(&path)?;
    let mut rt = rt_summary(&ensemble);
    rt.extend(result.rt_forecast.iter().cloned());
    let path = out("rt.csv");
    write_rt(&rt, create(&path)?)?;
    manifest.output(&path)?;
    let path = out("ess.csv");
    write_ess(&report, create(&path)?)?;
    manifest.output(&path)?;

    manifest.details = json!({
        "pathogen": args.pathogen.to_string(),
        "origin_date": origin.to_string(),
        "simulation_start": data.start_date().to_string(),
        "particles": config.n_particles,
        "lag": config.lag,
        "horizon": config.horizon,
        "two_stream": data.two_stream(),
        "log_likelihood": report.log_likelihood,
        "min_ess": min_ess,
        "omega_cases": data.cases().map(|_| data.omega_c().omega),
        "omega_admissions": data.admissions().map(|_| data.omega_h().omega),
    });
    manifest.write(&out("manifest.json"))
}
