//! No-U-Turn sampler with multinomial trajectory sampling, dual-averaging
//! step-size adaptation and a windowed dense metric.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A differentiable log density on R^n.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    /// Returns the log density at `x` and writes its gradient. Non-finite
    /// values mark points outside the support.
    fn ln_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NutsSettings {
    pub warmup: usize,
    pub draws: usize,
    pub max_depth: usize,
    pub target_accept: f64,
}

impl Default for NutsSettings {
    fn default() -> Self {
        NutsSettings { warmup: 1000, draws: 1000, max_depth: 10, target_accept: 0.9 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainStats {
    pub step_size: f64,
    pub mean_accept: f64,
    pub divergences: usize,
    pub max_depth_hits: usize,
    pub mean_tree_depth: f64,
    pub gradient_evals: usize,
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    /// Post-warmup draws, one row per iteration.
    pub draws: Vec<Vec<f64>>,
    pub stats: ChainStats,
}

const MAX_DELTA_H: f64 = 1000.0;

#[derive(Clone)]
struct Point {
    x: DVector<f64>,
    p: DVector<f64>,
    grad: DVector<f64>,
    logp: f64,
}

struct Metric {
    /// Inverse mass matrix.
    inv: DMatrix<f64>,
    /// Lower Cholesky factor of `inv`.
    chol: DMatrix<f64>,
}

impl Metric {
    fn identity(n: usize) -> Self {
        Metric { inv: DMatrix::identity(n, n), chol: DMatrix::identity(n, n) }
    }

    fn from_covariance(cov: DMatrix<f64>) -> Option<Self> {
        let chol = cov.clone().cholesky()?.l();
        Some(Metric { inv: cov, chol })
    }

    fn velocity(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.inv * p
    }

    fn kinetic(&self, p: &DVector<f64>) -> f64 {
        0.5 * p.dot(&self.velocity(p))
    }

    /// Momentum ~ N(0, inv^{-1}): solve L^T p = z.
    fn sample_momentum<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let n = self.inv.nrows();
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        self.chol
            .transpose()
            .solve_upper_triangular(&z)
            .unwrap_or(z)
    }
}

struct Sampler<'a, D: LogDensity> {
    model: &'a D,
    metric: Metric,
    step: f64,
    max_depth: usize,
    grad_buf: Vec<f64>,
    n_grad: usize,
}

struct TreeOut {
    sample: Point,
    log_sum_weight: f64,
    rho: DVector<f64>,
    p_sharp_beg: DVector<f64>,
    p_sharp_end: DVector<f64>,
    p_beg: DVector<f64>,
    p_end: DVector<f64>,
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn no_u_turn(p_sharp_minus: &DVector<f64>, p_sharp_plus: &DVector<f64>, rho: &DVector<f64>) -> bool {
    p_sharp_plus.dot(rho) > 0.0 && p_sharp_minus.dot(rho) > 0.0
}

impl<'a, D: LogDensity> Sampler<'a, D> {
    fn eval(&mut self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        self.n_grad += 1;
        let lp = self.model.ln_density_grad(x.as_slice(), &mut self.grad_buf);
        let lp = if lp.is_finite() { lp } else { f64::NEG_INFINITY };
        (lp, DVector::from_column_slice(&self.grad_buf))
    }

    fn hamiltonian(&self, z: &Point) -> f64 {
        let h = -z.logp + self.metric.kinetic(&z.p);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn leapfrog(&mut self, z: &mut Point, eps: f64) {
        z.p += &z.grad * (0.5 * eps);
        z.x += self.metric.velocity(&z.p) * eps;
        let (lp, g) = self.eval(&z.x);
        z.logp = lp;
        if lp.is_finite() {
            z.grad = g;
            z.p += &z.grad * (0.5 * eps);
        }
    }

    /// Recursive doubling in one direction from `z`, which is advanced in place.
    #[allow(clippy::too_many_arguments)]
    fn build_tree<R: Rng + ?Sized>(
        &mut self,
        depth: usize,
        z: &mut Point,
        h0: f64,
        sign: f64,
        sum_metro: &mut f64,
        n_leapfrog: &mut usize,
        divergent: &mut bool,
        rng: &mut R,
    ) -> Option<TreeOut> {
        if depth == 0 {
            self.leapfrog(z, sign * self.step);
            *n_leapfrog += 1;
            let h = self.hamiltonian(z);
            if h - h0 > MAX_DELTA_H || !z.logp.is_finite() {
                *divergent = true;
            }
            let delta = h0 - h;
            *sum_metro += if delta > 0.0 { 1.0 } else { delta.exp() };
            if *divergent {
                return None;
            }
            let p_sharp = self.metric.velocity(&z.p);
            return Some(TreeOut {
                sample: z.clone(),
                log_sum_weight: delta,
                rho: z.p.clone(),
                p_sharp_beg: p_sharp.clone(),
                p_sharp_end: p_sharp,
                p_beg: z.p.clone(),
                p_end: z.p.clone(),
            });
        }
        let init = self.build_tree(depth - 1, z, h0, sign, sum_metro, n_leapfrog, divergent, rng)?;
        let fin = self.build_tree(depth - 1, z, h0, sign, sum_metro, n_leapfrog, divergent, rng)?;

        let log_sum_weight = log_sum_exp(init.log_sum_weight, fin.log_sum_weight);
        let accept_final = fin.log_sum_weight > log_sum_weight
            || rng.random::<f64>() < (fin.log_sum_weight - log_sum_weight).exp();
        let rho = &init.rho + &fin.rho;

        let mut persist = no_u_turn(&init.p_sharp_beg, &fin.p_sharp_end, &rho);
        let rho_ext = &init.rho + &fin.p_beg;
        persist &= no_u_turn(&init.p_sharp_beg, &fin.p_sharp_beg, &rho_ext);
        let rho_ext = &fin.rho + &init.p_end;
        persist &= no_u_turn(&init.p_sharp_end, &fin.p_sharp_end, &rho_ext);
        if !persist {
            return None;
        }
        Some(TreeOut {
            sample: if accept_final { fin.sample } else { init.sample },
            log_sum_weight,
            rho,
            p_sharp_beg: init.p_sharp_beg,
            p_sharp_end: fin.p_sharp_end,
            p_beg: init.p_beg,
            p_end: fin.p_end,
        })
    }

    /// One NUTS transition. Returns the new point, acceptance statistic,
    /// tree depth and divergence flag.
    fn transition<R: Rng + ?Sized>(&mut self, current: &Point, rng: &mut R) -> (Point, f64, usize, bool) {
        let mut z0 = current.clone();
        z0.p = self.metric.sample_momentum(rng);
        let h0 = self.hamiltonian(&z0);

        let mut z_fwd = z0.clone();
        let mut z_bck = z0.clone();
        let mut sample = z0.clone();
        let mut log_sum_weight = 0.0;
        let mut rho = z0.p.clone();
        let p_sharp0 = self.metric.velocity(&z0.p);
        let (mut p_sharp_fwd, mut p_sharp_bck) = (p_sharp0.clone(), p_sharp0);
        let (mut p_fwd, mut p_bck) = (z0.p.clone(), z0.p.clone());

        let mut depth = 0;
        let mut sum_metro = 0.0;
        let mut n_leapfrog = 0usize;
        let mut divergent = false;

        while depth < self.max_depth {
            let forward = rng.random::<bool>();
            let sub = if forward {
                self.build_tree(depth, &mut z_fwd, h0, 1.0, &mut sum_metro, &mut n_leapfrog, &mut divergent, rng)
            } else {
                self.build_tree(depth, &mut z_bck, h0, -1.0, &mut sum_metro, &mut n_leapfrog, &mut divergent, rng)
            };
            let Some(sub) = sub else { break };
            depth += 1;

            if sub.log_sum_weight > log_sum_weight
                || rng.random::<f64>() < (sub.log_sum_weight - log_sum_weight).exp()
            {
                sample = sub.sample.clone();
            }
            log_sum_weight = log_sum_exp(log_sum_weight, sub.log_sum_weight);

            // Orient the old tree and the new subtree as (backward, forward).
            let (rho_bck, rho_fwd, ps_bck_fwd, ps_fwd_bck, p_bck_fwd, p_fwd_bck);
            if forward {
                rho_bck = rho.clone();
                rho_fwd = sub.rho.clone();
                ps_bck_fwd = p_sharp_fwd.clone();
                ps_fwd_bck = sub.p_sharp_beg.clone();
                p_bck_fwd = p_fwd.clone();
                p_fwd_bck = sub.p_beg.clone();
                p_sharp_fwd = sub.p_sharp_end;
                p_fwd = sub.p_end;
            } else {
                rho_fwd = rho.clone();
                rho_bck = sub.rho.clone();
                ps_fwd_bck = p_sharp_bck.clone();
                ps_bck_fwd = sub.p_sharp_beg.clone();
                p_fwd_bck = p_bck.clone();
                p_bck_fwd = sub.p_beg.clone();
                p_sharp_bck = sub.p_sharp_end;
                p_bck = sub.p_end;
            }
            rho = &rho_bck + &rho_fwd;
            let mut persist = no_u_turn(&p_sharp_bck, &p_sharp_fwd, &rho);
            persist &= no_u_turn(&p_sharp_bck, &ps_fwd_bck, &(&rho_bck + &p_fwd_bck));
            persist &= no_u_turn(&ps_bck_fwd, &p_sharp_fwd, &(&rho_fwd + &p_bck_fwd));
            if !persist {
                break;
            }
        }
        let accept = if n_leapfrog > 0 { sum_metro / n_leapfrog as f64 } else { 0.0 };
        (sample, accept, depth, divergent)
    }

    fn init_step_size<R: Rng + ?Sized>(&mut self, z: &Point, rng: &mut R) {
        let mut probe = z.clone();
        probe.p = self.metric.sample_momentum(rng);
        let h0 = self.hamiltonian(&probe);
        self.leapfrog(&mut probe, self.step);
        let delta = h0 - self.hamiltonian(&probe);
        let direction = if delta > 0.8f64.ln() { 1 } else { -1 };
        for _ in 0..60 {
            let mut probe = z.clone();
            probe.p = self.metric.sample_momentum(rng);
            let h0 = self.hamiltonian(&probe);
            self.leapfrog(&mut probe, self.step);
            let delta = h0 - self.hamiltonian(&probe);
            if direction == 1 && !(delta > 0.8f64.ln()) {
                break;
            }
            if direction == -1 && !(delta < 0.8f64.ln()) {
                break;
            }
            self.step = if direction == 1 { self.step * 2.0 } else { self.step * 0.5 };
            if self.step > 1e7 || self.step < 1e-12 {
                break;
            }
        }
    }
}

struct DualAveraging {
    mu: f64,
    s_bar: f64,
    x_bar: f64,
    counter: f64,
    target: f64,
}

impl DualAveraging {
    fn new(step: f64, target: f64) -> Self {
        DualAveraging { mu: (10.0 * step).ln(), s_bar: 0.0, x_bar: 0.0, counter: 0.0, target }
    }

    fn update(&mut self, accept: f64) -> f64 {
        const GAMMA: f64 = 0.05;
        const T0: f64 = 10.0;
        const KAPPA: f64 = 0.75;
        self.counter += 1.0;
        let accept = accept.min(1.0);
        let eta = 1.0 / (self.counter + T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - accept);
        let x = self.mu - self.s_bar * self.counter.sqrt() / GAMMA;
        let x_eta = self.counter.powf(-KAPPA);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    fn final_step(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Slow-window boundaries for metric adaptation: `(start, end)` iteration pairs.
fn adaptation_windows(warmup: usize) -> Vec<(usize, usize)> {
    if warmup < 20 {
        return Vec::new();
    }
    let (mut init, mut term, mut base) = (75usize, 50usize, 25usize);
    if init + term + base > warmup {
        init = (0.15 * warmup as f64) as usize;
        term = (0.1 * warmup as f64) as usize;
        base = warmup - init - term;
    }
    let end_slow = warmup - term;
    let mut windows = Vec::new();
    let mut start = init;
    let mut size = base;
    while start < end_slow {
        let mut end = start + size;
        // Stretch the last window to the terminal buffer.
        if end + 2 * size > end_slow {
            end = end_slow;
        }
        windows.push((start, end));
        start = end;
        size *= 2;
    }
    windows
}

fn covariance(samples: &[Vec<f64>]) -> DMatrix<f64> {
    let n = samples.len();
    let d = samples[0].len();
    let mut mean = DVector::zeros(d);
    for s in samples {
        mean += DVector::from_column_slice(s);
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for s in samples {
        let c = DVector::from_column_slice(s) - &mean;
        cov += &c * c.transpose();
    }
    cov /= (n - 1) as f64;
    let nf = n as f64;
    cov *= nf / (nf + 5.0);
    for i in 0..d {
        cov[(i, i)] += 1e-3 * 5.0 / (nf + 5.0);
    }
    cov
}

/// Run one chain from `init`.
pub fn run_chain<D: LogDensity, R: Rng + ?Sized>(
    model: &D,
    init: &[f64],
    settings: &NutsSettings,
    rng: &mut R,
) -> Result<ChainOutput> {
    let n = model.dim();
    if init.len() != n {
        return Err(Error::Parameter(format!("initial point has {} values, model has {n}", init.len())));
    }
    let mut sampler = Sampler {
        model,
        metric: Metric::identity(n),
        step: 0.1,
        max_depth: settings.max_depth,
        grad_buf: vec![0.0; n],
        n_grad: 0,
    };
    let x0 = DVector::from_column_slice(init);
    let (logp, grad) = sampler.eval(&x0);
    if !logp.is_finite() {
        return Err(Error::Numerical("log density is not finite at the initial point".into()));
    }
    let mut z = Point { x: x0, p: DVector::zeros(n), grad, logp };
    sampler.init_step_size(&z, rng);
    let mut da = DualAveraging::new(sampler.step, settings.target_accept);

    let windows = adaptation_windows(settings.warmup);
    let mut window_idx = 0;
    let mut window_samples: Vec<Vec<f64>> = Vec::new();

    for it in 0..settings.warmup {
        let (next, accept, _, _) = sampler.transition(&z, rng);
        z = next;
        sampler.step = da.update(accept);
        if let Some(&(start, end)) = windows.get(window_idx) {
            if it >= start && it < end {
                window_samples.push(z.x.as_slice().to_vec());
            }
            if it + 1 == end {
                if window_samples.len() > 2 {
                    if let Some(m) = Metric::from_covariance(covariance(&window_samples)) {
                        sampler.metric = m;
                    }
                }
                window_samples.clear();
                window_idx += 1;
                sampler.init_step_size(&z, rng);
                da = DualAveraging::new(sampler.step, settings.target_accept);
            }
        }
    }
    if settings.warmup > 0 {
        sampler.step = da.final_step();
    }

    let mut draws = Vec::with_capacity(settings.draws);
    let mut stats = ChainStats { step_size: sampler.step, ..Default::default() };
    let mut depth_sum = 0usize;
    let mut accept_sum = 0.0;
    for _ in 0..settings.draws {
        let (next, accept, depth, divergent) = sampler.transition(&z, rng);
        z = next;
        accept_sum += accept;
        depth_sum += depth;
        stats.divergences += divergent as usize;
        stats.max_depth_hits += (depth >= settings.max_depth) as usize;
        draws.push(z.x.as_slice().to_vec());
    }
    if settings.draws > 0 {
        stats.mean_accept = accept_sum / settings.draws as f64;
        stats.mean_tree_depth = depth_sum as f64 / settings.draws as f64;
    }
    stats.gradient_evals = sampler.n_grad;
    Ok(ChainOutput { draws, stats })
}
