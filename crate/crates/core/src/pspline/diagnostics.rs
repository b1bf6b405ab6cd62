//! Split-R̂ and effective sample size across chains.

use serde::{Deserialize, Serialize};

use super::nuts::ChainStats;

/// Convergence diagnostics for one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostic {
    pub name: String,
    pub rhat: f64,
    pub ess: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub params: Vec<ParamDiagnostic>,
    pub rhat_threshold: f64,
    pub ess_threshold: f64,
    pub divergences: usize,
    pub mean_accept: f64,
    pub step_sizes: Vec<f64>,
}

impl Diagnostics {
    pub fn max_rhat(&self) -> f64 {
        self.params.iter().map(|p| p.rhat).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_ess(&self) -> f64 {
        self.params.iter().map(|p| p.ess).fold(f64::INFINITY, f64::min)
    }

    pub fn converged(&self) -> bool {
        self.params.iter().all(|p| p.rhat < self.rhat_threshold && p.ess > self.ess_threshold)
    }

    /// Worst parameters and headline numbers on one line.
    pub fn summary(&self) -> String {
        let worst_rhat = self
            .params
            .iter()
            .max_by(|a, b| a.rhat.total_cmp(&b.rhat))
            .map(|p| format!("{} R-hat {:.3}", p.name, p.rhat))
            .unwrap_or_default();
        let worst_ess = self
            .params
            .iter()
            .min_by(|a, b| a.ess.total_cmp(&b.ess))
            .map(|p| format!("{} ESS {:.0}", p.name, p.ess))
            .unwrap_or_default();
        format!(
            "max {worst_rhat} (limit {}), min {worst_ess} (limit {}), {} divergent transitions, mean acceptance {:.2}",
            self.rhat_threshold, self.ess_threshold, self.divergences, self.mean_accept
        )
    }

    pub(crate) fn from_chains(names: &[String], chains: &[Vec<Vec<f64>>], stats: &[ChainStats]) -> Self {
        let params = names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let series: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|d| d[j]).collect()).collect();
                ParamDiagnostic { name: name.clone(), rhat: split_rhat(&series), ess: ess(&series) }
            })
            .collect();
        let n = stats.len().max(1) as f64;
        Diagnostics {
            params,
            rhat_threshold: 1.05,
            ess_threshold: 200.0,
            divergences: stats.iter().map(|s| s.divergences).sum(),
            mean_accept: stats.iter().map(|s| s.mean_accept).sum::<f64>() / n,
            step_sizes: stats.iter().map(|s| s.step_size).collect(),
        }
    }
}

fn split(chains: &[Vec<f64>]) -> Vec<&[f64]> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        out.push(&c[..half]);
        out.push(&c[c.len() - half..]);
    }
    out
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Potential scale reduction on split chains.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let parts = split(chains);
    let n = parts.first().map_or(0, |p| p.len());
    if parts.len() < 2 || n < 2 {
        return f64::NAN;
    }
    let mv: Vec<(f64, f64)> = parts.iter().map(|p| mean_var(p)).collect();
    let m = mv.len() as f64;
    let grand = mv.iter().map(|x| x.0).sum::<f64>() / m;
    let b = n as f64 / (m - 1.0) * mv.iter().map(|x| (x.0 - grand).powi(2)).sum::<f64>();
    let w = mv.iter().map(|x| x.1).sum::<f64>() / m;
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    (var_plus / w).sqrt()
}

fn centred(x: &[f64]) -> Vec<f64> {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - m).collect()
}

fn autocovariance_at(c: &[f64], lag: usize) -> f64 {
    let n = c.len();
    c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
}

/// Effective sample size on split chains using Geyer's initial monotone
/// sequence over summed autocorrelation pairs.
pub fn ess(chains: &[Vec<f64>]) -> f64 {
    let parts = split(chains);
    let n = parts.first().map_or(0, |p| p.len());
    let m = parts.len();
    if m < 2 || n < 4 {
        return f64::NAN;
    }
    let centred: Vec<Vec<f64>> = parts.iter().map(|p| centred(p)).collect();
    let means: Vec<f64> = parts.iter().map(|p| p.iter().sum::<f64>() / n as f64).collect();
    let nf = n as f64;
    let mean_var = centred.iter().map(|c| autocovariance_at(c, 0) * nf / (nf - 1.0)).sum::<f64>() / m as f64;
    let grand = means.iter().sum::<f64>() / m as f64;
    let b_over_n = means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (m as f64 - 1.0);
    let var_plus = mean_var * (nf - 1.0) / nf + b_over_n;
    if !(var_plus > 0.0) {
        return m as f64 * nf;
    }
    let rho = |t: usize| -> f64 {
        let mean_acov = centred.iter().map(|c| autocovariance_at(c, t)).sum::<f64>() / m as f64;
        1.0 - (mean_var - mean_acov) / var_plus
    };

    let mut rho_hat = vec![0.0; n];
    rho_hat[0] = 1.0;
    rho_hat[1] = rho(1);
    let mut t = 1;
    while t + 2 < n {
        let a = rho(t + 1);
        let b = rho(t + 2);
        if a + b < 0.0 {
            break;
        }
        rho_hat[t + 1] = a;
        rho_hat[t + 2] = b;
        t += 2;
    }
    let max_t = t;
    // Monotone sequence: pair sums may not increase.
    let mut s = 1;
    while s + 2 <= max_t {
        let prev = rho_hat[s - 1] + rho_hat[s];
        if rho_hat[s + 1] + rho_hat[s + 2] > prev {
            rho_hat[s + 1] = prev / 2.0;
            rho_hat[s + 2] = prev / 2.0;
        }
        s += 2;
    }
    let tau: f64 = -1.0 + 2.0 * rho_hat[..=max_t].iter().sum::<f64>() + if max_t + 1 < n { rho_hat[max_t + 1] } else { 0.0 };
    let total = m as f64 * nf;
    let tau = tau.max(1.0 / total.log10());
    total / tau
}
