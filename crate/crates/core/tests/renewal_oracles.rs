mod common;

use common::matern_bessel;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use respicast::delay::{discretize_gamma, DelaySpec, DiscretePmf};
use respicast::dist::negbin_ln_pmf;
use respicast::renewal::{
    chr_step, convolve_observed, gp_conditional, matern52, observation_loglik, renewal_step, DayObservation,
    GpKernel, GpPredictor, ObservationParams,
};
use respicast::stats::centred_moving_average;
use statrs::distribution::{Discrete, NegativeBinomial};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn closed_form_matern_matches_bessel_form() {
    let kernel = GpKernel::default();
    assert!((matern52(0.0, &kernel) - 0.01).abs() < 1e-15);
    assert!((matern52(30.0, &kernel) - matern_bessel(30.0, 0.1, 30.0)).abs() < 1e-10);
    for d in [0.5, 1.0, 7.0, 29.0, 60.0, 120.0, 300.0] {
        for (s0, l) in [(0.1, 30.0), (0.5, 7.0), (1.0, 100.0)] {
            let k = GpKernel { s0, l, sn: 0.001 };
            let a = matern52(d, &k);
            let b = matern_bessel(d, s0, l);
            assert!((a - b).abs() < 1e-10 * s0 * s0, "d = {d}, s0 = {s0}, l = {l}: {a} vs {b}");
        }
    }
}

#[test]
fn matern_decays_monotonically() {
    let kernel = GpKernel::default();
    let values: Vec<f64> = (0..400).map(|d| matern52(d as f64, &kernel)).collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]));
    assert!(values[399] < 1e-12);
}

#[test]
fn conditional_matches_dense_solve() {
    let kernel = GpKernel { s0: 0.2, l: 10.0, sn: 0.05 };
    let mut r = rng(1);
    let history: Vec<f64> = (0..25).map(|_| r.random_range(-0.5..0.5)).collect();
    let n = history.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        matern_bessel((i as f64 - j as f64).abs(), 0.2, 10.0) + if i == j { 0.05f64.powi(2) } else { 0.0 }
    });
    let ks = DVector::from_fn(n, |j, _| matern_bessel((n - j) as f64, 0.2, 10.0));
    let inv = k.try_inverse().unwrap();
    let mean = (ks.transpose() * &inv * DVector::from_column_slice(&history))[(0, 0)];
    let var = 0.04 + 0.0025 - (ks.transpose() * &inv * &ks)[(0, 0)];
    let (m, v) = gp_conditional(&history, &kernel, 120).unwrap();
    assert!((m - mean).abs() < 1e-9, "{m} vs {mean}");
    assert!((v - var).abs() < 1e-9, "{v} vs {var}");
    let predictor = GpPredictor::new(kernel, 120).unwrap();
    let (pm, ps) = predictor.conditional(&history);
    assert!((pm - mean).abs() < 1e-8 && (ps * ps - var).abs() < 1e-8);
}

#[test]
fn constant_history_is_reproduced() {
    let kernel = GpKernel::default();
    let (m, _) = gp_conditional(&[0.3; 100], &kernel, 120).unwrap();
    assert!((m - 0.3).abs() < 1e-3, "{m}");
}

#[test]
fn point_mass_renewal_has_the_right_mean() {
    let g = DiscretePmf::point_mass(1);
    let mut r = rng(2);
    let draws: Vec<f64> = (0..100_000).map(|_| renewal_step(&[10], 2.0, &g, &mut r) as f64).collect();
    let (m, v) = mean_var(&draws);
    let se = (20.0f64 / 1e5).sqrt();
    assert!((m - 20.0).abs() < 3.0 * se, "{m}");
    assert!((v - 20.0).abs() < 0.5, "{v}");
}

#[test]
fn renewal_mean_matches_weighted_history() {
    let g = discretize_gamma(&DelaySpec::new(3.3, 3.5, 1, 15).unwrap()).unwrap();
    let mut r = rng(3);
    let history: Vec<u64> = (0..30).map(|_| r.random_range(5..200)).collect();
    let pressure: f64 = (1..=15).map(|s| g.prob(s) * history[history.len() - s] as f64).sum();
    let expected = 1.3 * pressure;
    let draws: Vec<f64> = (0..50_000).map(|_| renewal_step(&history, 1.3, &g, &mut r) as f64).collect();
    let (m, _) = mean_var(&draws);
    assert!((m - expected).abs() < 3.0 * (expected / 5e4).sqrt(), "{m} vs {expected}");
}

#[test]
fn convolution_matches_double_loop() {
    let mut r = rng(4);
    for _ in 0..200 {
        let min = r.random_range(0..3);
        let len = r.random_range(1..20);
        let weights: Vec<f64> = (0..len).map(|_| r.random::<f64>()).collect();
        let pmf = DiscretePmf::from_weights(min, weights).unwrap();
        let history: Vec<u64> = (0..r.random_range(1..40)).map(|_| r.random_range(0..1000)).collect();
        let t = history.len() - 1;
        let mut want = 0.0;
        for s in pmf.min_lag()..=pmf.max_lag() {
            for (j, &i) in history.iter().enumerate() {
                if j + s == t {
                    want += pmf.prob(s) * i as f64;
                }
            }
        }
        let got = convolve_observed(&history, &pmf);
        assert!((got - want).abs() < 1e-12 * want.max(1.0), "{got} vs {want}");
    }
    let pmf = discretize_gamma(&DelaySpec::new(6.3, 3.1, 0, 25).unwrap()).unwrap();
    assert!((convolve_observed(&[40; 30], &pmf) - 40.0).abs() < 1e-10);
    assert_eq!(convolve_observed(&[1, 2, 77], &DiscretePmf::point_mass(0)), 77.0);
}

#[test]
fn chr_walk_increments_and_martingale() {
    let mut r = rng(5);
    let sigma = 0.05;
    let inc: Vec<f64> = (0..100_000).map(|_| chr_step(0.0, sigma, &mut r)).collect();
    let (m, v) = mean_var(&inc);
    let var_se = sigma * sigma * (2.0f64 / 1e5).sqrt();
    assert!((v - sigma * sigma).abs() < 3.0 * var_se, "{v}");
    assert!(m.abs() < 3.0 * sigma / 1e5f64.sqrt());

    let start = -2.0;
    let ends: Vec<f64> = (0..20_000)
        .map(|_| (0..30).fold(start, |lp, _| chr_step(lp, sigma, &mut r)))
        .collect();
    let (m, _) = mean_var(&ends);
    let se = sigma * 30f64.sqrt() / 20_000f64.sqrt();
    assert!((m - start).abs() < 3.0 * se, "{m}");
    assert_eq!(chr_step(start, 0.0, &mut r), start);
}

#[test]
fn observation_likelihood_matches_independent_pmf() {
    let params = ObservationParams { p_c: 1.0, k_c: 25.0, k_h: 25.0 };
    let obs = DayObservation { z: 10.0, h: 50.0, p: 0.2, omega_c: 1.0, omega_h: 1.0, cases: Some(7), admissions: None };
    let want = NegativeBinomial::new(25.0, 25.0 / 35.0).unwrap().ln_pmf(7);
    assert!((observation_loglik(&obs, &params) - want).abs() < 1e-10);

    let obs = DayObservation { admissions: Some(12), omega_h: 1.2, ..obs };
    let mean_a = 1.2 * 0.2 * 50.0;
    let want = want + NegativeBinomial::new(25.0, 25.0 / (25.0 + mean_a)).unwrap().ln_pmf(12);
    assert!((observation_loglik(&obs, &params) - want).abs() < 1e-10);

    let poisson = ObservationParams { k_c: f64::INFINITY, ..params };
    let obs = DayObservation { z: 3.0, cases: Some(3), admissions: None, ..obs };
    let closed = 3.0 * 3f64.ln() - 3.0 - 6f64.ln();
    assert!((observation_loglik(&obs, &poisson) - closed).abs() < 1e-12);

    assert_eq!(negbin_ln_pmf(0, 0.0, 25.0), 0.0);
    assert_eq!(negbin_ln_pmf(2, 0.0, 25.0), f64::NEG_INFINITY);
}

#[test]
fn moving_average_matches_windowed_mean() {
    let mut r = rng(6);
    for len in [1usize, 2, 5, 7, 8, 30] {
        let v: Vec<f64> = (0..len).map(|_| r.random_range(0.0..100.0)).collect();
        let got = centred_moving_average(&v, 7);
        for i in 0..len {
            let window: Vec<f64> = (0..len).filter(|&j| (j as i64 - i as i64).abs() <= 3).map(|j| v[j]).collect();
            let want = window.iter().sum::<f64>() / window.len() as f64;
            assert!((got[i] - want).abs() < 1e-12);
        }
    }
}
