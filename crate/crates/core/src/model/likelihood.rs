//! Per-individual likelihood pieces and the integrated joint likelihood.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::data::{ChoiceDataset, Individual};
use crate::model::kernels::{log_sum_exp, mnl_log_probability, ordered_logit_log_probability, utilities_into};
use crate::model::spec::CompiledModel;
use crate::model::state::ParameterState;
use crate::real::Real;
use crate::rng::stream_seed;

/// Log probability of the observed choice.
#[inline]
pub fn choice_loglik<T: Real>(
    model: &CompiledModel,
    individual: &Individual<T>,
    fixed: &[T],
    beta: &[T],
    alpha: &[T],
    scratch: &mut Vec<T>,
) -> T {
    utilities_into(model, individual, fixed, beta, alpha, scratch);
    mnl_log_probability(scratch, individual.chosen_position())
}

/// Log probability of one indicator response; zero when unanswered.
#[inline]
pub fn indicator_term<T: Real>(
    model: &CompiledModel,
    individual: &Individual<T>,
    q: usize,
    zeta: T,
    tau: &[T],
    alpha: &[T],
) -> T {
    match individual.responses[q] {
        Some(c) => ordered_logit_log_probability(c as usize, zeta * alpha[model.indicators[q].latent], tau),
        None => T::zero(),
    }
}

/// Sum of the indicator log probabilities of one individual.
pub fn indicator_loglik<T: Real>(
    model: &CompiledModel,
    individual: &Individual<T>,
    zeta: &[T],
    tau: &[Vec<T>],
    alpha: &[T],
) -> T {
    (0..model.n_indicators())
        .map(|q| indicator_term(model, individual, q, zeta[q], &tau[q], alpha))
        .sum()
}

/// Log density of `N(mean, I)` at `x`.
pub fn std_normal_logpdf<T: Real>(x: &[T], mean: &[T]) -> T {
    let half = T::c(0.5);
    let c = T::c(0.5 * (2.0 * std::f64::consts::PI).ln());
    x.iter()
        .zip(mean)
        .map(|(&a, &m)| -half * (a - m) * (a - m) - c)
        .sum()
}

fn beta_for<'a, T: Real>(state: &'a ParameterState<T>, i: usize) -> &'a [T] {
    if state.beta.is_empty() {
        &state.mu
    } else {
        &state.beta[i]
    }
}

/// log of the integrand `P(choice | α) Π P(indicator | α)` for one individual.
fn integrand_log<T: Real>(
    model: &CompiledModel,
    state: &ParameterState<T>,
    ind: &Individual<T>,
    i: usize,
    alpha: &[T],
    scratch: &mut Vec<T>,
) -> T {
    choice_loglik(model, ind, &state.fixed, beta_for(state, i), alpha, scratch)
        + indicator_loglik(model, ind, &state.zeta, &state.tau, alpha)
}

fn check_inputs<T: Real>(model: &CompiledModel, data: &ChoiceDataset<T>, state: &ParameterState<T>) -> Result<()> {
    data.validate(model)?;
    state.validate(model)?;
    if !state.beta.is_empty() && state.beta.len() != data.len() {
        return Err(Error::Config("state holds per-individual coefficients for a different sample".into()));
    }
    Ok(())
}

/// Simulated joint log-likelihood: for each individual the integrand is
/// averaged over `n_draws` latent draws from `N(Γz, I)`; per-individual
/// `beta` comes from the state (or `mu` when the state has none).
///
/// Deterministic in `seed`. An individual whose simulated likelihood
/// underflows to zero yields [`Error::ZeroLikelihood`].
pub fn joint_loglik_mc<T: Real>(
    model: &CompiledModel,
    data: &ChoiceDataset<T>,
    state: &ParameterState<T>,
    n_draws: usize,
    seed: u64,
) -> Result<T> {
    if n_draws == 0 {
        return Err(Error::Config("n_draws must be positive".into()));
    }
    check_inputs(model, data, state)?;
    let l = model.n_latent();
    let ln_r = T::c(n_draws as f64).ln();
    let mut scratch = Vec::new();
    let mut logs = Vec::with_capacity(n_draws);
    let mut alpha = vec![T::zero(); l];
    let mut total = T::zero();
    for (i, ind) in data.individuals.iter().enumerate() {
        let mean = state.gamma.mul_vec(&ind.z);
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &[i as u64]));
        logs.clear();
        for _ in 0..n_draws {
            for (a, &m) in alpha.iter_mut().zip(&mean) {
                *a = m + T::sample_standard_normal(&mut rng);
            }
            logs.push(integrand_log(model, state, ind, i, &alpha, &mut scratch));
        }
        let li = log_sum_exp(&logs) - ln_r;
        if li == T::neg_infinity() || li.is_nan() {
            return Err(Error::ZeroLikelihood { id: ind.id.clone() });
        }
        total = total + li;
    }
    Ok(total)
}

/// Integration grid for [`joint_loglik_quadrature`], in units of the
/// standardized structural error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureGrid {
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
}

/// Brute-force trapezoidal evaluation of the joint log-likelihood; the
/// reference against which [`joint_loglik_mc`] is checked. At most two
/// latent variables.
pub fn joint_loglik_quadrature<T: Real>(
    model: &CompiledModel,
    data: &ChoiceDataset<T>,
    state: &ParameterState<T>,
    grid: QuadratureGrid,
) -> Result<T> {
    let l = model.n_latent();
    if l > 2 {
        return Err(Error::UnsupportedOracle(format!(
            "quadrature supports at most 2 latent variables, model has {l}"
        )));
    }
    if grid.n_points < 101 || !(grid.lo < grid.hi) {
        return Err(Error::Config("quadrature grid needs lo < hi and at least 101 points".into()));
    }
    check_inputs(model, data, state)?;
    let h = (grid.hi - grid.lo) / (grid.n_points - 1) as f64;
    // log of (trapezoid weight × standard normal density) per node
    let nodes: Vec<(f64, f64)> = (0..grid.n_points)
        .map(|k| {
            let x = grid.lo + h * k as f64;
            let w = if k == 0 || k + 1 == grid.n_points { 0.5 * h } else { h };
            (x, w.ln() - 0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln())
        })
        .collect();
    let mut scratch = Vec::new();
    let mut total = T::zero();
    let mut logs: Vec<T> = Vec::new();
    for (i, ind) in data.individuals.iter().enumerate() {
        let mean = state.gamma.mul_vec(&ind.z);
        logs.clear();
        match l {
            0 => logs.push(integrand_log(model, state, ind, i, &[], &mut scratch)),
            1 => {
                for &(x, lw) in &nodes {
                    let a = [mean[0] + T::c(x)];
                    logs.push(T::c(lw) + integrand_log(model, state, ind, i, &a, &mut scratch));
                }
            }
            _ => {
                for &(x0, w0) in &nodes {
                    for &(x1, w1) in &nodes {
                        let a = [mean[0] + T::c(x0), mean[1] + T::c(x1)];
                        logs.push(T::c(w0 + w1) + integrand_log(model, state, ind, i, &a, &mut scratch));
                    }
                }
            }
        }
        let li = log_sum_exp(&logs);
        if li == T::neg_infinity() || li.is_nan() {
            return Err(Error::ZeroLikelihood { id: ind.id.clone() });
        }
        total = total + li;
    }
    Ok(total)
}

/// Choice log-likelihood at per-individual coefficient and latent values
/// (falls back to `mu` and `Γz` when the state has no individual blocks).
pub fn choice_loglik_total<T: Real>(model: &CompiledModel, data: &ChoiceDataset<T>, state: &ParameterState<T>) -> T {
    let mut scratch = Vec::new();
    data.individuals
        .iter()
        .enumerate()
        .map(|(i, ind)| {
            let alpha = if state.alpha.is_empty() { state.gamma.mul_vec(&ind.z) } else { state.alpha[i].clone() };
            choice_loglik(model, ind, &state.fixed, beta_for(state, i), &alpha, &mut scratch)
        })
        .sum()
}
