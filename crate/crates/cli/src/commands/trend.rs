use std::io::Write;

use respicast::io::read_counts_file;
use respicast::pspline::{
    fit_pspline, informative_priors, summarise_trend, write_posterior, write_trend_summary, Diagnostics, SplineBasis,
    TrendPriors,
};
use respicast::series::window_series;
use respicast::Error;
use serde_json::json;

use super::{create, ensure_dir, LoadedConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;
use crate::{Format, TrendArgs};

fn diagnostics_json(d: &Diagnostics) -> serde_json::Value {
    json!({
        "converged": d.converged(),
        "max_rhat": d.max_rhat(),
        "min_ess": d.min_ess(),
        "detail": d,
    })
}

fn load_priors(args: &TrendArgs, manifest: &mut Manifest) -> CliResult<TrendPriors> {
    let Some(path) = &args.priors_from else {
        return Ok(TrendPriors::uninformative());
    };
    manifest.input("priors_from", path)?;
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let draws = respicast::pspline::read_posterior(file)?;
    let get = |name: &str| {
        draws.get(name).ok_or_else(|| CliError::Data(format!("{}: no {name} draws", path.display())))
    };
    Ok(informative_priors(get("tau")?, get("k")?)?)
}

pub fn run(cfg: &LoadedConfig, args: &TrendArgs) -> CliResult<()> {
    let config = &cfg.config;
    let mut settings = config.trend.sampler;
    if let Some(seed) = args.seed {
        settings.seed = seed;
    }
    let mut manifest = cfg.manifest("trend", settings.seed)?;
    manifest.input("input", &args.input)?;
    let series = read_counts_file(&args.input, args.pathogen, args.stream)?;
    let window = args.window_days.unwrap_or(config.trend.window_days);
    if window == 0 {
        return Err(CliError::Usage("--window-days must be positive".into()));
    }
    let series = window_series(&series, window);
    let priors = load_priors(args, &mut manifest)?;
    log::info!("priors: tau ~ {:?}, k ~ {:?}", priors.tau, priors.k);
    log::info!("fitting {} from {} to {} ({} days)", series.key(), series.start_date(), series.origin_date(), series.len());
    let basis = SplineBasis::new(series.start_date(), series.len(), config.trend.knot_spacing, config.trend.knot_extension)?;

    ensure_dir(&args.output)?;
    manifest.details = json!({
        "target": series.key().to_string(),
        "fit_start": series.start_date().to_string(),
        "fit_end": series.origin_date().to_string(),
        "fit_days": series.len(),
        "day_of_week": args.dow,
        "priors": priors,
    });
    let samples = match fit_pspline(&series, &basis, priors, &settings, args.dow) {
        Ok(s) => s,
        Err(Error::NonConvergence(diag)) => {
            let path = args.output.join("diagnostics.json");
            std::fs::write(&path, serde_json::to_string_pretty(&diagnostics_json(&diag))?)
                .map_err(|e| CliError::io(&path, e))?;
            manifest.output(&path)?;
            manifest.details["diagnostics"] = diagnostics_json(&diag);
            manifest.write(&args.output.join("manifest.json"))?;
            return Err(Error::NonConvergence(diag).into());
        }
        Err(e) => return Err(e.into()),
    };
    log::info!("{}", samples.diagnostics.summary());
    let summary = summarise_trend(&samples, None)?;

    let summary_path = match args.format {
        Format::Csv => {
            let path = args.output.join("trend_summary.csv");
            write_trend_summary(&summary, create(&path)?)?;
            path
        }
        Format::Json => {
            let path = args.output.join("trend_summary.json");
            let mut w = create(&path)?;
            serde_json::to_writer_pretty(&mut w, &summary)?;
            w.write_all(b"\n").map_err(|e| CliError::io(&path, e))?;
            w.flush().map_err(|e| CliError::io(&path, e))?;
            path
        }
    };
    manifest.output(&summary_path)?;
    let posterior_path = args.output.join("posterior.csv");
    write_posterior(&samples, create(&posterior_path)?)?;
    manifest.output(&posterior_path)?;
    manifest.details["diagnostics"] = diagnostics_json(&samples.diagnostics);
    manifest.write(&args.output.join("manifest.json"))
}
