mod common;

use chrono::Duration;
use common::date;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use respicast::dist::sample_negbin;
use respicast::pspline::{
    build_basis, derive_informative_priors, fit_pspline, growth_rate, summarise_trend, PosteriorSamples,
    SamplerSettings, ScalePrior, TrendPriors,
};
use respicast::series::{CountSeries, Pathogen, Stream};
use respicast::Error;

fn settings(seed: u64) -> SamplerSettings {
    SamplerSettings { seed, ..Default::default() }
}

fn simulate(n: usize, seed: u64, mean: impl Fn(usize) -> f64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|t| sample_negbin(&mut rng, mean(t), 25.0)).collect()
}

fn fit(counts: Vec<u64>, start: &str, dow: bool, seed: u64) -> PosteriorSamples {
    let start = date(start);
    let n = counts.len();
    let series = CountSeries::new(Pathogen::SarsCov2, Stream::Cases, start, counts).unwrap();
    fit_pspline(&series, &build_basis(start, n).unwrap(), TrendPriors::default(), &settings(seed), dow).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn constant_series_is_stable() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let counts = (0..120).map(|_| respicast::dist::sample_poisson(&mut rng, 20.0)).collect();
    let samples = fit(counts, "2024-01-01", false, 1);
    assert!(samples.diagnostics.converged());
    let summary = summarise_trend(&samples, None).unwrap();
    let stable = summary.days.iter().filter(|d| d.stable).count();
    assert!(stable as f64 >= 0.9 * 120.0, "stable on {stable}/120 days");
    let mid = summary.days[60].expected;
    assert!(mid[0] < 20.0 && 20.0 < mid[4], "{mid:?}");
}

#[test]
fn exponential_growth_rate_is_recovered() {
    let samples = fit(simulate(80, 2, |t| 10.0 * (0.05 * t as f64).exp()), "2024-01-01", false, 2);
    let r = growth_rate(&samples);
    for t in 20..60 {
        let m = median(r.iter().map(|row| row[t]).collect());
        assert!((m - 0.05).abs() < 0.015, "day {t}: median growth {m}");
    }
    let summary = summarise_trend(&samples, None).unwrap();
    let mid = &summary.days[40];
    assert!(mid.p_growth > 0.95);
    let dt = mid.doubling_time.unwrap();
    assert!((dt - std::f64::consts::LN_2 / 0.05).abs() < 5.0, "{dt}");
}

#[test]
fn in_model_day_of_week_finds_a_heavy_monday() {
    let monday: f64 = 1.75;
    let other = monday.powf(-1.0 / 6.0);
    // 2024-01-01 is a Monday.
    let counts = simulate(84, 3, |t| 60.0 * if t % 7 == 0 { monday } else { other });
    let samples = fit(counts, "2024-01-01", true, 3);
    let mon = samples.draws.iter().map(|d| d.log_omega.unwrap()[0].exp()).sum::<f64>() / samples.len() as f64;
    assert!((1.5..=2.0).contains(&mon), "Monday multiplier {mon}");
    let summary = summarise_trend(&samples, None).unwrap();
    assert!(summary.days.iter().all(|d| d.expected_dow.is_some()));
}

#[test]
fn shifting_the_dates_shifts_the_fit() {
    let counts = simulate(60, 4, |t| 15.0 + 10.0 * (t as f64 / 10.0).sin().abs());
    let a = summarise_trend(&fit(counts.clone(), "2024-03-04", false, 9), None).unwrap();
    let b = summarise_trend(&fit(counts, "2024-03-11", false, 9), None).unwrap();
    for (x, y) in a.days.iter().zip(&b.days) {
        assert_eq!(y.date - x.date, Duration::days(7));
        for q in 0..5 {
            assert!((x.expected[q] - y.expected[q]).abs() <= 0.05 * x.expected[q], "{:?} vs {:?}", x.expected, y.expected);
        }
    }
}

#[test]
fn all_zero_series_fits_low_or_reports_diagnostics() {
    let start = date("2024-01-01");
    let series = CountSeries::new(Pathogen::Rsv, Stream::Admissions, start, vec![0; 40]).unwrap();
    match fit_pspline(&series, &build_basis(start, 40).unwrap(), TrendPriors::default(), &settings(5), false) {
        Ok(samples) => {
            let summary = summarise_trend(&samples, None).unwrap();
            assert!(summary.days.iter().all(|d| d.expected[2] < 1.0));
        }
        Err(Error::NonConvergence(d)) => assert!(!d.converged()),
        Err(e) => panic!("unexpected error {e}"),
    }
}

#[test]
fn informative_priors_copy_posterior_moments() {
    let samples = fit(simulate(50, 6, |_| 30.0), "2024-01-01", false, 6);
    let priors = derive_informative_priors(&samples).unwrap();
    let k = samples.k();
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    let sd = (k.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k.len() - 1) as f64).sqrt();
    match priors.k {
        ScalePrior::Normal { mean: m, sd: s } => {
            assert!((m - mean).abs() < 1e-12 * mean.abs().max(1.0));
            assert!((s - sd).abs() < 1e-12 * sd.max(1.0));
        }
        other => panic!("expected a normal prior, got {other:?}"),
    }
}

#[test]
fn same_seed_same_draws() {
    let counts = simulate(40, 7, |_| 12.0);
    let a = fit(counts.clone(), "2024-01-01", false, 21);
    let b = fit(counts, "2024-01-01", false, 21);
    assert_eq!(a.draws, b.draws);
}
