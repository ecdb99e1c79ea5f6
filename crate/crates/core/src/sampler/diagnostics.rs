//! Split-R̂ and effective sample size across chains.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::sampler::chain::PosteriorDraws;

/// R̂ above this marks a parameter as not converged.
pub const RHAT_THRESHOLD: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDiagnostic {
    pub name: String,
    /// `None` when the parameter is degenerate.
    pub rhat: Option<f64>,
    pub ess: Option<f64>,
    /// Zero within-chain variance.
    pub degenerate: bool,
    /// R̂ > [`RHAT_THRESHOLD`].
    pub not_converged: bool,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Halves every chain (dropping the middle draw of odd lengths) after
/// trimming all chains to the shortest length.
fn split(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let half = n / 2;
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        out.push(c[..half].to_vec());
        out.push(c[n - half..n].to_vec());
    }
    out
}

/// Potential scale reduction on split chains. `None` when the within-chain
/// variance is zero.
pub fn split_rhat(chains: &[&[f64]]) -> Option<f64> {
    let s = split(chains);
    let n = s.first().map_or(0, Vec::len);
    if s.len() < 2 || n < 2 {
        return None;
    }
    let means: Vec<f64> = s.iter().map(|c| mean(c)).collect();
    let w = mean(&s.iter().map(|c| sample_variance(c)).collect::<Vec<_>>());
    if !(w > 0.0) || !w.is_finite() {
        return None;
    }
    let nf = n as f64;
    let b = nf * sample_variance(&means);
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    Some((var_plus / w).sqrt())
}

/// Biased autocovariance for lags `0..n` via zero-padded FFT.
fn autocovariance(x: &[f64], planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v - m, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    buf[..n].iter().map(|c| c.re / (size as f64 * n as f64)).collect()
}

/// Multi-chain effective sample size with Geyer's initial monotone
/// sequence estimator over split chains.
pub fn effective_sample_size(chains: &[&[f64]]) -> Option<f64> {
    let s = split(chains);
    let m = s.len();
    let n = s.first().map_or(0, Vec::len);
    if m < 2 || n < 4 {
        return None;
    }
    let mut planner = FftPlanner::new();
    let acov: Vec<Vec<f64>> = s.iter().map(|c| autocovariance(c, &mut planner)).collect();
    let nf = n as f64;
    let chain_var: Vec<f64> = acov.iter().map(|a| a[0] * nf / (nf - 1.0)).collect();
    let w = mean(&chain_var);
    if !(w > 0.0) {
        return None;
    }
    let means: Vec<f64> = s.iter().map(|c| mean(c)).collect();
    let b_over_n = sample_variance(&means);
    let var_plus = w * (nf - 1.0) / nf + b_over_n;
    let rho = |t: usize| 1.0 - (w - mean(&acov.iter().map(|a| a[t]).collect::<Vec<_>>())) / var_plus;

    let mut sum = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let mut pair = rho(t) + rho(t + 1);
        if pair <= 0.0 {
            break;
        }
        if pair > prev_pair {
            pair = prev_pair;
        }
        sum += pair;
        prev_pair = pair;
        t += 2;
    }
    let tau = (-1.0 + 2.0 * sum).max(1.0 / (m as f64 * nf).log10().max(1.0));
    Some(m as f64 * nf / tau)
}

/// Split-R̂ and ESS for every population parameter shared by `chains`.
pub fn convergence_diagnostics<T: Real>(chains: &[PosteriorDraws<T>]) -> Result<Vec<ParameterDiagnostic>> {
    let first = chains.first().ok_or_else(|| Error::Config("no chains supplied".into()))?;
    if chains.iter().any(|c| c.parameter_names != first.parameter_names) {
        return Err(Error::Config("chains describe different parameters".into()));
    }
    let series: Vec<Vec<Vec<f64>>> = chains
        .iter()
        .map(|c| {
            (0..c.parameter_names.len())
                .map(|j| c.population.iter().map(|row| row[j].to_f64_lossy()).collect())
                .collect()
        })
        .collect();
    diagnose_series(&first.parameter_names, &series)
}

/// As [`convergence_diagnostics`] on raw series: `series[chain][parameter][draw]`.
pub fn diagnose_series(names: &[String], series: &[Vec<Vec<f64>>]) -> Result<Vec<ParameterDiagnostic>> {
    if series.is_empty() {
        return Err(Error::Config("no chains supplied".into()));
    }
    let min_len = series.iter().flat_map(|c| c.iter().map(Vec::len)).min().unwrap_or(0);
    if min_len < 4 {
        return Err(Error::Config("convergence diagnostics need at least 4 draws per chain".into()));
    }
    Ok(names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let chains: Vec<&[f64]> = series.iter().map(|c| c[j].as_slice()).collect();
            let rhat = split_rhat(&chains);
            let ess = rhat.and_then(|_| effective_sample_size(&chains));
            ParameterDiagnostic {
                name: name.clone(),
                rhat,
                ess,
                degenerate: rhat.is_none(),
                not_converged: rhat.is_some_and(|r| r > RHAT_THRESHOLD),
            }
        })
        .collect())
}
