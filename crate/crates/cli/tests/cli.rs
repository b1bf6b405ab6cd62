//! Drives the `respicast` binary end to end.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{Duration, NaiveDate};
use respicast::config::{RunConfig, ScenarioConfig};
use respicast::io::{read_counts_file, read_revisions, write_counts_file};
use respicast::pspline::read_trend_summary;
use respicast::renewal::export::{read_forecast_quantiles, read_forecast_samples, read_rt};
use respicast::scoring::{read_horizon_means, read_scores, score_forecast, ScoreSettings};
use respicast::series::{CountSeries, Pathogen, Stream};
use respicast::synth::simulate_replicate;
use serde_json::Value;
use tempfile::TempDir;

fn respicast(args: &[&str]) -> Output {
    command(args).output().expect("spawn respicast")
}

fn command(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_respicast"));
    cmd.args(args).env_remove("RESPICAST_CONFIG").env("RUST_LOG", "warn");
    cmd
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn date(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

const SCENARIO: &str = r#"
pathogen = "SARSCoV2"
start_date = "2024-09-02"
length = 90
seed_infections = 300.0
seed = 5
chr = { kind = "constant", p = 0.05 }
rt = { kind = "constant", r = 1.0 }
"#;

/// Simulated SARS-CoV-2 cases and admissions written as count files.
fn sars_inputs(dir: &Path) -> (PathBuf, PathBuf) {
    let spec = ScenarioConfig::from_toml_str(SCENARIO).unwrap().to_spec(&RunConfig::default()).unwrap();
    let sim = simulate_replicate(&spec, 0).unwrap();
    let cases = dir.join("SARSCoV2_cases.csv");
    let adm = dir.join("SARSCoV2_admissions.csv");
    write_counts_file(sim.cases.as_ref().unwrap(), &cases).unwrap();
    write_counts_file(&sim.admissions, &adm).unwrap();
    (cases, adm)
}

fn run_forecast(cases: &Path, adm: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "forecast", "--pathogen", "SARSCoV2", "--cases", p(cases), "--admissions", p(adm), "--particles", "2000",
        "--output", p(out),
    ];
    if !extra.contains(&"--seed") {
        args.extend(["--seed", "3"]);
    }
    args.extend_from_slice(extra);
    respicast(&args)
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn manifest(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn bad_invocations_are_usage_errors() {
    let tmp = TempDir::new().unwrap();
    let (cases, adm) = sars_inputs(tmp.path());
    let out = tmp.path().join("out");
    assert_eq!(code(&respicast(&[])), 2);
    assert_eq!(code(&respicast(&["forecast", "--bogus"])), 2);
    assert_eq!(code(&respicast(&["forecast", "--pathogen", "SARSCoV2", "--output", p(&out)])), 2);
    assert_eq!(code(&respicast(&["--threads", "0", "diff-rounds", "--earlier", "a", "--later", "b", "--output", "c"])), 2);
    let rsv = respicast(&["forecast", "--pathogen", "RSV", "--cases", p(&cases), "--admissions", p(&adm), "--output", p(&out)]);
    assert_eq!(code(&rsv), 2, "{}", stderr(&rsv));
    assert_eq!(code(&run_forecast(&cases, &adm, &out, &["--horizon", "0"])), 2);
    assert_eq!(code(&respicast(&["--help"])), 0);
}

#[test]
fn data_problems_exit_with_4() {
    let tmp = TempDir::new().unwrap();
    let (cases, adm) = sars_inputs(tmp.path());
    let out = tmp.path().join("out");
    let late = run_forecast(&cases, &adm, &out, &["--origin-date", "2025-06-01"]);
    assert_eq!(code(&late), 4);
    assert!(stderr(&late).contains("2025-06-01"), "{}", stderr(&late));
    let missing = tmp.path().join("missing.csv");
    assert_eq!(code(&run_forecast(&missing, &adm, &out, &[])), 4);
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "date,count\n2024-01-01,3\n2024-01-02,x\n").unwrap();
    let out_bad = run_forecast(&bad, &adm, &out, &[]);
    assert_eq!(code(&out_bad), 4, "{}", stderr(&out_bad));
}

#[test]
fn filter_degeneracy_exits_with_5() {
    let tmp = TempDir::new().unwrap();
    let mut counts = vec![0u64; 60];
    counts[50] = 5;
    let series = CountSeries::new(Pathogen::Influenza, Stream::Admissions, date("2024-01-01"), counts).unwrap();
    let adm = tmp.path().join("flu.csv");
    write_counts_file(&series, &adm).unwrap();
    let config = tmp.path().join("poisson.toml");
    fs::write(&config, "[observation]\nk_h = inf\n").unwrap();
    let out = respicast(&[
        "--config", p(&config), "forecast", "--pathogen", "Influenza", "--admissions", p(&adm), "--particles", "1000",
        "--output", p(&tmp.path().join("out")),
    ]);
    assert_eq!(code(&out), 5);
    assert!(stderr(&out).contains("2024-02-20"), "{}", stderr(&out));
}

#[test]
fn forecast_writes_28_days_of_7_quantiles_per_target() {
    let tmp = TempDir::new().unwrap();
    let (cases, adm) = sars_inputs(tmp.path());
    let out = tmp.path().join("out");
    let res = run_forecast(&cases, &adm, &out, &[]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));

    let rows = read_forecast_quantiles(fs::File::open(out.join("forecast_quantiles.csv")).unwrap()).unwrap();
    let mut per_target: BTreeMap<String, Vec<_>> = BTreeMap::new();
    for r in &rows {
        per_target.entry(r.target.clone()).or_default().push(r);
    }
    assert_eq!(per_target.keys().cloned().collect::<Vec<_>>(), ["SARSCoV2_admissions", "SARSCoV2_cases"]);
    let origin = date("2024-11-30");
    for rows in per_target.values() {
        assert_eq!(rows.len(), 28 * 7);
        let dates: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.date.as_str()).collect();
        assert_eq!(dates.len(), 28);
        assert_eq!(*dates.first().unwrap(), (origin + Duration::days(1)).to_string());
        assert_eq!(*dates.last().unwrap(), (origin + Duration::days(28)).to_string());
        for day in rows.chunks(7) {
            assert!(day.windows(2).all(|w| w[0].quantile < w[1].quantile && w[0].value <= w[1].value));
        }
    }

    let samples = read_forecast_samples(fs::File::open(out.join("forecast_samples.csv")).unwrap()).unwrap();
    assert_eq!(samples.entries.len(), 56);
    assert!(samples.entries.values().all(|(_, s)| s.len() == 2000));
    let rt = read_rt(fs::File::open(out.join("rt.csv")).unwrap()).unwrap();
    assert_eq!(rt.last().unwrap().date, origin + Duration::days(28));

    let m = manifest(&out.join("manifest.json"));
    assert_eq!(m["command"], "forecast");
    assert_eq!(m["seed"], 3);
    assert_eq!(m["details"]["origin_date"], "2024-11-30");
    assert_eq!(m["details"]["two_stream"], true);
    for name in ["forecast_quantiles.csv", "forecast_samples.csv", "rt.csv", "ess.csv"] {
        let bytes = fs::read(out.join(name)).unwrap();
        use sha2::Digest;
        assert_eq!(m["outputs"][name], hex::encode(sha2::Sha256::digest(&bytes)), "{name}");
    }
    assert!(m["inputs"]["cases"]["sha256"].is_string());
}

#[test]
fn forecast_is_byte_identical_on_rerun() {
    let tmp = TempDir::new().unwrap();
    let (cases, adm) = sars_inputs(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let res = run_forecast(&cases, &adm, &a, &["--horizon", "7"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let res = run_forecast(&cases, &adm, &b, &["--horizon", "7", "--threads", "2"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let (x, y) = (read_dir_bytes(&a), read_dir_bytes(&b));
    assert_eq!(x.keys().collect::<Vec<_>>(), y.keys().collect::<Vec<_>>());
    for (name, bytes) in &x {
        if name != "manifest.json" {
            assert!(bytes == &y[name], "{name} differs");
        }
    }
    let (ma, mb) = (manifest(&a.join("manifest.json")), manifest(&b.join("manifest.json")));
    assert_eq!(ma["outputs"], mb["outputs"]);
    let other = tmp.path().join("c");
    assert_eq!(code(&run_forecast(&cases, &adm, &other, &["--horizon", "7", "--seed", "4"])), 0);
    assert!(read_dir_bytes(&other)["forecast_samples.csv"] != x["forecast_samples.csv"]);
}

#[test]
fn config_from_environment_applies() {
    let tmp = TempDir::new().unwrap();
    let (cases, adm) = sars_inputs(tmp.path());
    let config = tmp.path().join("short.toml");
    fs::write(&config, "[filter]\nhorizon = 5\n").unwrap();
    let out = tmp.path().join("out");
    let res = command(&[
        "forecast", "--pathogen", "SARSCoV2", "--cases", p(&cases), "--admissions", p(&adm), "--particles", "1000",
        "--output", p(&out),
    ])
    .env("RESPICAST_CONFIG", &config)
    .output()
    .unwrap();
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let rows = read_forecast_quantiles(fs::File::open(out.join("forecast_quantiles.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2 * 5 * 7);
    let m = manifest(&out.join("manifest.json"));
    assert!(m["inputs"]["config"]["sha256"].is_string());
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[filter]\nhorizon = \"soon\"\n").unwrap();
    let res = command(&["diff-rounds", "--earlier", "a", "--later", "b", "--output", "c"])
        .env("RESPICAST_CONFIG", &bad)
        .output()
        .unwrap();
    assert_eq!(code(&res), 2);
}

fn write_samples(path: &Path, rows: &[(&str, &str, usize, Vec<u64>)]) {
    let mut text = String::from("target,date,horizon,sample,value\n");
    for (target, d, h, values) in rows {
        for (i, v) in values.iter().enumerate() {
            text.push_str(&format!("{target},{d},{h},{i},{v}\n"));
        }
    }
    fs::write(path, text).unwrap();
}

#[test]
fn perfect_forecast_scores_zero() {
    let tmp = TempDir::new().unwrap();
    let truth = CountSeries::new(Pathogen::Rsv, Stream::Admissions, date("2024-12-01"), vec![4, 7, 9, 12]).unwrap();
    let truth_path = tmp.path().join("RSV_admissions.csv");
    write_counts_file(&truth, &truth_path).unwrap();
    let fc = tmp.path().join("fc.csv");
    write_samples(
        &fc,
        &[
            ("RSV_admissions", "2024-12-02", 1, vec![7; 50]),
            ("RSV_admissions", "2024-12-03", 2, vec![9; 50]),
            ("RSV_admissions", "2024-12-04", 3, vec![12; 50]),
        ],
    );
    let out = tmp.path().join("out");
    let res = respicast(&["score", "--forecast", p(&fc), "--truth", p(&truth_path), "--output", p(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let scores = read_scores(fs::File::open(out.join("scores.csv")).unwrap()).unwrap();
    assert_eq!(scores.len(), 3);
    assert!(scores.iter().all(|s| s.crps == 0.0 && s.origin_date == date("2024-12-01")), "{scores:?}");
    let means = read_horizon_means(fs::File::open(out.join("scores_by_horizon.csv")).unwrap()).unwrap();
    assert_eq!(means.len(), 3);
}

#[test]
fn cli_scores_match_the_library() {
    let tmp = TempDir::new().unwrap();
    let (cases, adm) = sars_inputs(tmp.path());
    let fc_dir = tmp.path().join("fc");
    assert_eq!(code(&run_forecast(&cases, &adm, &fc_dir, &["--origin-date", "2024-11-10", "--horizon", "14"])), 0);
    let samples = fc_dir.join("forecast_samples.csv");
    let out = tmp.path().join("scores");
    let res = respicast(&[
        "score", "--forecast", p(&samples), "--truth", p(&cases), "--truth", &format!("SARSCoV2_admissions={}", p(&adm)),
        "--samples", "500", "--seed", "8", "--output", p(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let cli = read_scores(fs::File::open(out.join("scores.csv")).unwrap()).unwrap();
    let table = read_forecast_samples(fs::File::open(&samples).unwrap()).unwrap();
    let settings = ScoreSettings { n_samples: 500, seed: 8, ..Default::default() };
    let mut lib = Vec::new();
    for (path, stream) in [(&adm, Stream::Admissions), (&cases, Stream::Cases)] {
        lib.extend(score_forecast(&table, &read_counts_file(path, Pathogen::SarsCov2, stream).unwrap(), &settings).unwrap());
    }
    assert_eq!(cli.len(), 28);
    for c in &cli {
        let l = lib.iter().find(|l| l.target == c.target && l.horizon == c.horizon).unwrap();
        assert!((c.crps - l.crps).abs() < 1e-9, "{c:?} vs {l:?}");
    }
    let means = read_horizon_means(fs::File::open(out.join("scores_by_horizon.csv")).unwrap()).unwrap();
    assert_eq!(means.len(), 2 * 14);
}

#[test]
fn scoring_lists_dates_without_truth() {
    let tmp = TempDir::new().unwrap();
    let truth = CountSeries::new(Pathogen::Influenza, Stream::Admissions, date("2024-12-01"), vec![4, 7]).unwrap();
    let truth_path = tmp.path().join("Influenza_admissions.csv");
    write_counts_file(&truth, &truth_path).unwrap();
    let fc = tmp.path().join("fc.csv");
    write_samples(
        &fc,
        &[
            ("Influenza_admissions", "2024-12-02", 1, vec![5, 6]),
            ("Influenza_admissions", "2024-12-03", 2, vec![5, 6]),
            ("Influenza_admissions", "2024-12-04", 3, vec![5, 6]),
        ],
    );
    let res = respicast(&["score", "--forecast", p(&fc), "--truth", p(&truth_path), "--output", p(tmp.path())]);
    assert_eq!(code(&res), 4);
    assert!(stderr(&res).contains("2024-12-03, 2024-12-04"), "{}", stderr(&res));
}

#[test]
fn simulate_writes_distinct_reproducible_replicates() {
    let tmp = TempDir::new().unwrap();
    let scenario = tmp.path().join("scenario.toml");
    fs::write(&scenario, SCENARIO).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let res = respicast(&["simulate", "--scenario", p(&scenario), "--replicates", "3", "--output-dir", p(dir)]);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
    }
    let mut admissions = Vec::new();
    for r in 0..3 {
        let name = format!("replicate_{r:03}");
        let (x, y) = (read_dir_bytes(&a.join(&name)), read_dir_bytes(&b.join(&name)));
        assert_eq!(x.keys().collect::<Vec<_>>(), ["SARSCoV2_admissions.csv", "SARSCoV2_cases.csv", "truth.csv"]);
        assert!(x == y);
        admissions.push(x["SARSCoV2_admissions.csv"].clone());
        let series = read_counts_file(&a.join(&name).join("SARSCoV2_cases.csv"), Pathogen::SarsCov2, Stream::Cases).unwrap();
        assert_eq!(series.len(), 90);
    }
    assert!(admissions[0] != admissions[1] && admissions[1] != admissions[2]);
    let m = manifest(&a.join("manifest.json"));
    assert_eq!(m["details"]["replicates"], 3);

    let c = tmp.path().join("c");
    respicast(&["simulate", "--scenario", p(&scenario), "--seed", "6", "--output-dir", p(&c)]);
    assert!(read_dir_bytes(&c.join("replicate_000")) != read_dir_bytes(&a.join("replicate_000")));

    let invalid = tmp.path().join("invalid.toml");
    fs::write(&invalid, SCENARIO.replace("r = 1.0", "r = -1.0")).unwrap();
    let res = respicast(&["simulate", "--scenario", p(&invalid), "--output-dir", p(&c)]);
    assert_eq!(code(&res), 2);
}

#[test]
fn diff_rounds_matches_elementwise_comparison() {
    let tmp = TempDir::new().unwrap();
    let (early, late) = (tmp.path().join("early"), tmp.path().join("late"));
    fs::create_dir_all(&early).unwrap();
    fs::create_dir_all(&late).unwrap();
    let old = vec![3, 5, 8, 2, 0, 4];
    let new = vec![3, 6, 8, 2, 1, 4, 9];
    let start = date("2024-03-04");
    for (dir, counts) in [(&early, &old), (&late, &new)] {
        let s = CountSeries::new(Pathogen::Rsv, Stream::Admissions, start, counts.clone()).unwrap();
        write_counts_file(&s, &dir.join("RSV_admissions.csv")).unwrap();
    }
    let only_early = CountSeries::new(Pathogen::Influenza, Stream::Admissions, start, vec![1; 6]).unwrap();
    write_counts_file(&only_early, &early.join("Influenza_admissions.csv")).unwrap();
    let out = tmp.path().join("revisions.csv");
    let res = respicast(&["diff-rounds", "--earlier", p(&early), "--later", p(&late), "--output", p(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let revisions = read_revisions(fs::File::open(&out).unwrap()).unwrap();
    let expected: Vec<(NaiveDate, u64, u64)> = old
        .iter()
        .zip(&new)
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(i, (a, b))| (start + Duration::days(i as i64), *a, *b))
        .collect();
    assert_eq!(revisions.iter().map(|r| (r.date, r.old, r.new)).collect::<Vec<_>>(), expected);
    assert!(tmp.path().join("revisions.manifest.json").exists());

    let empty = tmp.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    write_counts_file(&only_early, &empty.join("Influenza_cases.csv")).unwrap();
    let res = respicast(&["diff-rounds", "--earlier", p(&late), "--later", p(&empty), "--output", p(&out)]);
    assert_eq!(code(&res), 4);
}

fn trend_quantity(dir: &Path, quantity: &str) -> Vec<f64> {
    read_trend_summary(fs::File::open(dir.join("trend_summary.csv")).unwrap())
        .unwrap()
        .into_iter()
        .filter(|r| r.quantity == quantity)
        .map(|r| r.value)
        .collect()
}

#[test]
fn trend_on_a_flat_simulation_is_undecided() {
    let tmp = TempDir::new().unwrap();
    let scenario = tmp.path().join("scenario.toml");
    fs::write(&scenario, SCENARIO.replace("length = 90", "length = 120")).unwrap();
    let sim = tmp.path().join("sim");
    assert_eq!(code(&respicast(&["simulate", "--scenario", p(&scenario), "--output-dir", p(&sim)])), 0);
    let input = sim.join("replicate_000").join("SARSCoV2_cases.csv");
    let out = tmp.path().join("trend");
    let res = respicast(&["trend", "--input", p(&input), "--pathogen", "SARSCoV2", "--stream", "cases", "--output", p(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let p_growth = trend_quantity(&out, "p_growth");
    assert_eq!(p_growth.len(), 120);
    assert!(p_growth.iter().any(|&v| v < 0.5) && p_growth.iter().any(|&v| v > 0.5));
    let m = manifest(&out.join("manifest.json"));
    assert_eq!(m["details"]["diagnostics"]["converged"], true);

    let priors_out = tmp.path().join("again");
    let res = respicast(&[
        "trend", "--input", p(&input), "--pathogen", "SARSCoV2", "--stream", "cases", "--window-days", "60",
        "--priors-from", p(&out.join("posterior.csv")), "--format", "json", "--output", p(&priors_out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let draws = respicast::pspline::read_posterior(fs::File::open(out.join("posterior.csv")).unwrap()).unwrap();
    let m = manifest(&priors_out.join("manifest.json"));
    for name in ["tau", "k"] {
        let v = &draws[name];
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
        let prior = &m["details"]["priors"][name];
        assert!((prior["mean"].as_f64().unwrap() - mean).abs() < 1e-9 * mean, "{name}: {prior}");
        assert!((prior["sd"].as_f64().unwrap() - sd).abs() < 1e-9 * sd, "{name}: {prior}");
    }
    assert_eq!(m["details"]["fit_days"], 60);
    assert_eq!(m["details"]["fit_start"], "2024-11-01");
    let summary: Value = serde_json::from_str(&fs::read_to_string(priors_out.join("trend_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["days"].as_array().unwrap().len(), 60);
}

#[test]
fn trend_keeps_the_trailing_three_years() {
    let tmp = TempDir::new().unwrap();
    let start = date("2019-01-01");
    let counts: Vec<u64> = (0..2000).map(|t| (40.0 + 15.0 * (t as f64 / 58.0).sin()).round() as u64).collect();
    let series = CountSeries::new(Pathogen::Influenza, Stream::Admissions, start, counts).unwrap();
    let input = tmp.path().join("long.csv");
    write_counts_file(&series, &input).unwrap();
    let out = tmp.path().join("out");
    let res = respicast(&[
        "trend", "--input", p(&input), "--pathogen", "flu", "--stream", "admissions", "--window-days", "1095",
        "--output", p(&out),
    ]);
    let m = manifest(&out.join("manifest.json"));
    assert_eq!(m["details"]["fit_days"], 1095);
    assert_eq!(m["details"]["fit_end"], (start + Duration::days(1999)).to_string());
    assert_eq!(m["details"]["fit_start"], (start + Duration::days(2000 - 1095)).to_string());
    assert!(matches!(code(&res), 0 | 3), "{}", stderr(&res));
}

#[test]
fn trend_nonconvergence_exits_with_3_and_writes_diagnostics() {
    let tmp = TempDir::new().unwrap();
    let series = CountSeries::new(Pathogen::Rsv, Stream::Admissions, date("2024-01-01"), (0..80).map(|t| (t % 9) * 3).collect())
        .unwrap();
    let input = tmp.path().join("rsv.csv");
    write_counts_file(&series, &input).unwrap();
    let config = tmp.path().join("tiny.toml");
    fs::write(&config, "[trend.sampler]\nchains = 4\nwarmup = 10\ndraws = 250\nattempts = 1\n").unwrap();
    let out = tmp.path().join("out");
    let res = respicast(&[
        "trend", "--config", p(&config), "--input", p(&input), "--pathogen", "RSV", "--stream", "admissions",
        "--output", p(&out),
    ]);
    assert_eq!(code(&res), 3, "{}", stderr(&res));
    let diag: Value = serde_json::from_str(&fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["converged"], false);
    assert!(!out.join("trend_summary.csv").exists());
}
