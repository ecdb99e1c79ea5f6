use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::sampler::chain::PosteriorDraws;

/// Welford accumulator for a vector of running means and variances.
#[derive(Debug, Clone)]
pub struct StreamingMoments<T> {
    n: usize,
    mean: Vec<T>,
    m2: Vec<T>,
}

impl<T: Real> StreamingMoments<T> {
    pub fn new(dim: usize) -> Self {
        Self { n: 0, mean: vec![T::zero(); dim], m2: vec![T::zero(); dim] }
    }

    pub fn push(&mut self, x: &[T]) {
        self.n += 1;
        let n = T::c(self.n as f64);
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m = *m + d / n;
            *s = *s + d * (v - *m);
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    /// Sample standard deviations (n − 1 denominator); zero below two observations.
    pub fn sd(&self) -> Vec<T> {
        if self.n < 2 {
            return vec![T::zero(); self.mean.len()];
        }
        let d = T::c((self.n - 1) as f64);
        self.m2.iter().map(|&s| (s / d).max(T::zero()).sqrt()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary<T> {
    pub name: String,
    pub mean: T,
    pub sd: T,
    /// mean / sd; `None` when the SD is zero.
    pub t_stat: Option<T>,
    pub lower_95: T,
    pub upper_95: T,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStatistics<T> {
    pub loglik_null: T,
    pub loglik_final: T,
    pub n_params: usize,
    pub rho_squared: T,
    pub adjusted_rho_squared: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary<T> {
    pub parameters: Vec<ParameterSummary<T>>,
    pub fit: FitStatistics<T>,
}

/// Linear-interpolation quantile of sorted data (type 7).
pub fn quantile_sorted<T: Real>(sorted: &[T], p: f64) -> T {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let w = T::c(h - lo as f64);
    sorted[lo] + w * (sorted[hi] - sorted[lo])
}

/// Two-pass moments, SD-based t statistic and central 95% interval.
pub fn summarize_values<T: Real>(name: &str, values: &[T]) -> Result<ParameterSummary<T>> {
    if values.len() < 2 {
        return Err(Error::Config(format!("'{name}': summaries need at least 2 draws")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
    let degenerate = sorted[0] == sorted[sorted.len() - 1];
    let n = T::c(values.len() as f64);
    let (mean, sd) = if degenerate {
        (sorted[0], T::zero())
    } else {
        let mean = values.iter().copied().sum::<T>() / n;
        let ss: T = values.iter().map(|&v| (v - mean) * (v - mean)).sum();
        (mean, (ss / (n - T::one())).sqrt())
    };
    // rounding can place the mean a hair outside a near-constant interval
    let lower = quantile_sorted(&sorted, 0.025).min(mean);
    let upper = quantile_sorted(&sorted, 0.975).max(mean);
    Ok(ParameterSummary {
        name: name.to_string(),
        mean,
        sd,
        t_stat: if degenerate { None } else { Some(mean / sd) },
        lower_95: lower,
        upper_95: upper,
        degenerate,
    })
}

/// ρ² = 1 − LL/LL₀ and adjusted ρ² = 1 − (LL − n_params)/LL₀.
pub fn fit_statistics<T: Real>(loglik_null: T, loglik_final: T, n_params: usize) -> FitStatistics<T> {
    FitStatistics {
        loglik_null,
        loglik_final,
        n_params,
        rho_squared: T::one() - loglik_final / loglik_null,
        adjusted_rho_squared: T::one() - (loglik_final - T::c(n_params as f64)) / loglik_null,
    }
}

/// Summaries of every population parameter, pooling the supplied chains.
pub fn summarize<T: Real>(
    chains: &[PosteriorDraws<T>],
    loglik_null: T,
    loglik_final: T,
    n_params: usize,
) -> Result<PosteriorSummary<T>> {
    let first = chains.first().ok_or_else(|| Error::Config("no draws supplied".into()))?;
    if chains.iter().any(|c| c.parameter_names != first.parameter_names) {
        return Err(Error::Config("chains describe different parameters".into()));
    }
    let parameters = first
        .parameter_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let values: Vec<T> = chains.iter().flat_map(|c| c.population.iter().map(move |row| row[j])).collect();
            summarize_values(name, &values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorSummary { parameters, fit: fit_statistics(loglik_null, loglik_final, n_params) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    Negative,
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Share of the population `N(mu, sd²)` whose coefficient has the given sign.
pub fn sign_probability<T: Real>(mu: T, sd: T, direction: Sign) -> T {
    let signed = match direction {
        Sign::Positive => mu,
        Sign::Negative => -mu,
    };
    if sd == T::zero() {
        return if signed > T::zero() {
            T::one()
        } else if signed < T::zero() {
            T::zero()
        } else {
            T::c(0.5)
        };
    }
    T::c(normal_cdf((signed / sd).to_f64_lossy()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_summary() {
        let s = summarize_values("x", &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.sd, 1.0);
        assert_eq!(s.t_stat, Some(2.0));
        assert!(s.lower_95 <= s.mean && s.mean <= s.upper_95);
    }

    #[test]
    fn constant_draws_flagged() {
        let s = summarize_values("x", &[0.3; 10]).unwrap();
        assert_eq!(s.sd, 0.0);
        assert!(s.degenerate);
        assert!(s.t_stat.is_none());
        assert!(summarize_values::<f64>("x", &[1.0]).is_err());
    }

    #[test]
    fn rho_squared_from_reported_logliks() {
        let f = fit_statistics(-46600.68f64, -16993.45, 0);
        assert!((f.rho_squared - 0.635).abs() <= 0.001, "{}", f.rho_squared);
        let adj = fit_statistics(-46600.68, -16993.45, 50);
        assert!(adj.adjusted_rho_squared < adj.rho_squared);
    }

    #[test]
    fn sign_probability_examples() {
        assert!(sign_probability(1.389, 0.208, Sign::Positive) >= 0.999);
        assert!((sign_probability(0.547f64, 0.337, Sign::Positive) - 0.947).abs() <= 0.005);
        assert_eq!(sign_probability(0.0, 1.0, Sign::Positive), 0.5);
        assert_eq!(sign_probability(-1.0, 0.0, Sign::Negative), 1.0);
        assert_eq!(sign_probability(0.0, 0.0, Sign::Negative), 0.5);
    }

    #[test]
    fn streaming_matches_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| 1e6 + (i as f64 * 0.37).sin()).collect();
        let mut m = StreamingMoments::new(1);
        for &x in &xs {
            m.push(&[x]);
        }
        let s = summarize_values("x", &xs).unwrap();
        assert!((m.mean()[0] - s.mean).abs() < 1e-10 * s.mean.abs());
        assert!((m.sd()[0] - s.sd).abs() < 1e-10);
    }
}
