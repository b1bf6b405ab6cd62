use std::path::Path;

use rayon::prelude::*;
use respicast::config::ScenarioConfig;
use respicast::io::write_counts_file;
use respicast::synth::{simulate_replicate, LatentTruth, SimOutput};
use serde::Serialize;
use serde_json::json;

use super::{create, ensure_dir, LoadedConfig};
use crate::error::{CliError, CliResult};
use crate::SimulateArgs;

#[derive(Serialize)]
struct TruthRow {
    date: String,
    r: f64,
    infections: u64,
    expected_reports: f64,
    expected_admissions: f64,
    chr: f64,
}

fn write_truth(truth: &LatentTruth, path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for t in 0..truth.r.len() {
        w.serialize(TruthRow {
            date: (truth.start_date + chrono::Duration::days(t as i64)).to_string(),
            r: truth.r[t],
            infections: truth.infections[t],
            expected_reports: truth.z[t],
            expected_admissions: truth.h[t],
            chr: truth.chr[t],
        })
        .map_err(respicast::Error::from)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn run(cfg: &LoadedConfig, args: &SimulateArgs) -> CliResult<()> {
    if args.replicates == 0 {
        return Err(CliError::Usage("--replicates must be at least 1".into()));
    }
    let mut scenario = ScenarioConfig::load(&args.scenario).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let spec = scenario.to_spec(&cfg.config).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut manifest = cfg.manifest("simulate", spec.seed)?;
    manifest.input("scenario", &args.scenario)?;

    let outputs: Vec<SimOutput> =
        (0..args.replicates).into_par_iter().map(|r| simulate_replicate(&spec, r as u64)).collect::<Result<_, _>>()?;
    ensure_dir(&args.output_dir)?;
    let mut extinct = Vec::new();
    for (r, out) in outputs.iter().enumerate() {
        let dir = args.output_dir.join(format!("replicate_{r:03}"));
        ensure_dir(&dir)?;
        let path = dir.join("truth.csv");
        write_truth(&out.truth, &path)?;
        manifest.outputs.insert(format!("replicate_{r:03}/truth.csv"), crate::manifest::hash_file(&path)?.sha256);
        for series in out.cases.iter().chain(std::iter::once(&out.admissions)) {
            let name = format!("{}.csv", series.key());
            let path = dir.join(&name);
            write_counts_file(series, &path)?;
            manifest.outputs.insert(format!("replicate_{r:03}/{name}"), crate::manifest::hash_file(&path)?.sha256);
        }
        if out.extinct {
            log::warn!("replicate {r}: epidemic went extinct");
            extinct.push(r);
        }
    }
    manifest.details = json!({
        "replicates": args.replicates,
        "pathogen": spec.pathogen.to_string(),
        "length": spec.length,
        "extinct": extinct,
    });
    manifest.write(&args.output_dir.join("manifest.json"))
}
