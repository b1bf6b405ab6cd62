use std::collections::BTreeMap;
use std::path::PathBuf;

use respicast::io::read_counts_file;
use respicast::renewal::export::read_forecast_samples;
use respicast::scoring::{
    mean_crps_by_horizon, missing_truth_dates, score_forecast, write_horizon_means, write_scores, ScoreSettings,
};
use respicast::series::{CountSeries, SeriesKey};
use serde_json::json;

use super::{create, ensure_dir, LoadedConfig};
use crate::error::{CliError, CliResult};
use crate::ScoreArgs;

/// Split `[TARGET=]path`; without a prefix the target is the file stem.
fn parse_truth_arg(arg: &str) -> CliResult<(SeriesKey, PathBuf)> {
    if let Some((target, path)) = arg.split_once('=') {
        let key = target.parse().map_err(|e: respicast::Error| CliError::Usage(e.to_string()))?;
        return Ok((key, PathBuf::from(path)));
    }
    let path = PathBuf::from(arg);
    let key = path
        .file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CliError::Usage(format!("{arg}: name the target as TARGET=path or use a <Pathogen>_<stream>.csv file")))?;
    Ok((key, path))
}

pub fn run(cfg: &LoadedConfig, args: &ScoreArgs) -> CliResult<()> {
    let mut settings: ScoreSettings = cfg.config.scoring;
    if let Some(t) = &args.transform {
        settings.transform = t.parse().map_err(|e: respicast::Error| CliError::Usage(e.to_string()))?;
    }
    if let Some(n) = args.samples {
        settings.n_samples = n;
    }
    if let Some(s) = args.seed {
        settings.seed = s;
    }
    if settings.n_samples < 2 {
        return Err(CliError::Usage("--samples must be at least 2".into()));
    }
    let mut manifest = cfg.manifest("score", settings.seed)?;

    let mut truth: BTreeMap<SeriesKey, CountSeries> = BTreeMap::new();
    for arg in &args.truth {
        let (key, path) = parse_truth_arg(arg)?;
        manifest.input(&format!("truth:{key}"), &path)?;
        let series = read_counts_file(&path, key.pathogen, key.stream)?;
        if truth.insert(key, series).is_some() {
            return Err(CliError::Usage(format!("truth for {key} given twice")));
        }
    }

    let mut records = Vec::new();
    for (i, path) in args.forecast.iter().enumerate() {
        manifest.input(&format!("forecast:{i}"), path)?;
        let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        let table = read_forecast_samples(file)?;
        for key in table.targets() {
            let series = truth
                .get(&key)
                .ok_or_else(|| CliError::Data(format!("{}: no truth supplied for {key}", path.display())))?;
            let missing = missing_truth_dates(&table, series);
            if !missing.is_empty() {
                let list: Vec<String> = missing.iter().map(|d| d.to_string()).collect();
                return Err(CliError::Data(format!(
                    "{}: {key} has no observations on {}",
                    path.display(),
                    list.join(", ")
                )));
            }
            records.extend(score_forecast(&table, series, &settings)?);
        }
    }
    records.sort_by_key(|r| (r.target, r.origin_date, r.horizon));
    let means = mean_crps_by_horizon(&records);

    ensure_dir(&args.output)?;
    let path = args.output.join("scores.csv");
    write_scores(&records, create(&path)?)?;
    manifest.output(&path)?;
    let path = args.output.join("scores_by_horizon.csv");
    write_horizon_means(&means, create(&path)?)?;
    manifest.output(&path)?;
    manifest.details = json!({
        "transform": settings.transform.to_string(),
        "n_samples": settings.n_samples,
        "records": records.len(),
    });
    manifest.write(&args.output.join("manifest.json"))
}
