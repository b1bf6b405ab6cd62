//! Reference implementations shared by the integration tests.
#![allow(dead_code)]

use chrono::NaiveDate;
use respicast::delay::DelaySpec;
use statrs::function::gamma::ln_gamma;

pub fn date(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

/// Published delay distributions: generation intervals, the report delay, admission delays.
pub fn published_specs() -> Vec<(&'static str, DelaySpec)> {
    vec![
        ("sars generation", DelaySpec::new(3.3, 3.5, 1, 15).unwrap()),
        ("flu generation", DelaySpec::new(2.6, 1.3, 1, 15).unwrap()),
        ("rsv generation", DelaySpec::new(7.5, 2.1, 1, 15).unwrap()),
        ("sars report", DelaySpec::new(6.3, 3.1, 0, 25).unwrap()),
        ("sars admission", DelaySpec::new(6.3, 3.7, 0, 25).unwrap()),
        ("flu admission", DelaySpec::new(3.6, 2.1, 0, 25).unwrap()),
        ("rsv admission", DelaySpec::new(6.9, 2.7, 0, 25).unwrap()),
    ]
}

pub fn gamma_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let shape = (mean / sd).powi(2);
    let scale = sd * sd / mean;
    if x <= 0.0 {
        return 0.0;
    }
    ((shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()).exp()
}

const GL_NODES: [f64; 5] = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const GL_WEIGHTS: [f64; 5] = [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];

/// Composite 5-point Gauss–Legendre on `pieces` equal sub-intervals.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let mid = a + (i as f64 + 0.5) * h;
            GL_NODES.iter().zip(GL_WEIGHTS).map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

/// `int_a^b gamma_pdf(x) g(x) dx`, with `x = v^(1/shape)` when the density is singular at zero.
pub fn integrate_gamma(mean: f64, sd: f64, g: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let shape = (mean / sd).powi(2);
    if a == 0.0 && shape < 1.0 {
        let m = 1.0 / shape;
        let f = |v: f64| {
            let x = v.powf(m);
            gamma_pdf(x, mean, sd) * g(x) * m * v.powf(m - 1.0)
        };
        integrate(f, 0.0, b.powf(shape), 400)
    } else {
        integrate(|x| gamma_pdf(x, mean, sd) * g(x), a, b, 200)
    }
}

fn normalise(w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Triangular-kernel discretisation of the gamma of `X - min_lag`.
pub fn cori_oracle(spec: &DelaySpec) -> Vec<f64> {
    let mean = spec.mean - spec.min_lag as f64;
    let w = (0..=spec.max_lag - spec.min_lag)
        .map(|j| {
            let j = j as f64;
            let tri = move |y: f64| (1.0 - (y - j).abs()).max(0.0);
            let lo = if j == 0.0 { 0.0 } else { integrate_gamma(mean, spec.sd, tri, j - 1.0, j) };
            lo + integrate_gamma(mean, spec.sd, tri, j, j + 1.0)
        })
        .collect();
    normalise(w)
}

/// Mass of the gamma within half a day of each lag.
pub fn interval_oracle(spec: &DelaySpec) -> Vec<f64> {
    let w = (spec.min_lag..=spec.max_lag)
        .map(|lag| {
            let lo = (lag as f64 - 0.5).max(0.0);
            integrate_gamma(spec.mean, spec.sd, |_| 1.0, lo, lag as f64 + 0.5)
        })
        .collect();
    normalise(w)
}

/// Modified Bessel function of the second kind at half-integer order `n + 1/2`,
/// by upward recurrence from `K_{1/2}` and `K_{-1/2}`.
pub fn bessel_k_half(n: usize, x: f64) -> f64 {
    let k_half = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp();
    let (mut prev, mut cur) = (k_half, k_half);
    for i in 0..n {
        let nu = i as f64 + 0.5;
        let next = prev + 2.0 * nu / x * cur;
        prev = cur;
        cur = next;
    }
    cur
}

/// General Matérn covariance with smoothness 5/2 in its Bessel form.
pub fn matern_bessel(d: f64, s0: f64, l: f64) -> f64 {
    if d == 0.0 {
        return s0 * s0;
    }
    let nu: f64 = 2.5;
    let x = (2.0 * nu).sqrt() * d.abs() / l;
    s0 * s0 * 2f64.powf(1.0 - nu) / ln_gamma(nu).exp() * x.powf(nu) * bessel_k_half(2, x)
}
