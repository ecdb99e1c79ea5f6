//! Individual-level quantities pooled over chains.

use crate::error::{Error, Result};
use crate::model::data::ChoiceDataset;
use crate::model::likelihood::choice_loglik_total;
use crate::model::spec::{CompiledModel, Slot};
use crate::model::state::ParameterState;
use crate::posterior::mwtp::{mwtp_from_moments, mwtp_individual, MwtpRecord};
use crate::real::Real;
use crate::sampler::chain::PosteriorDraws;

/// Posterior means and SDs per individual, pooled over equally long chains.
#[derive(Debug, Clone, PartialEq)]
pub struct IndividualMoments<T> {
    pub beta_mean: Vec<Vec<T>>,
    pub beta_sd: Vec<Vec<T>>,
    pub alpha_mean: Vec<Vec<T>>,
    pub alpha_sd: Vec<Vec<T>>,
}

fn pool<T: Real>(means: &[&Vec<Vec<T>>], sds: &[&Vec<Vec<T>>]) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
    let m = T::c(means.len() as f64);
    let n = means[0].len();
    let mut mean = Vec::with_capacity(n);
    let mut sd = Vec::with_capacity(n);
    for i in 0..n {
        let d = means[0][i].len();
        let mut mi = vec![T::zero(); d];
        let mut si = vec![T::zero(); d];
        for j in 0..d {
            let mu = means.iter().map(|c| c[i][j]).sum::<T>() / m;
            let second = means.iter().zip(sds).map(|(c, s)| s[i][j] * s[i][j] + c[i][j] * c[i][j]).sum::<T>() / m;
            mi[j] = mu;
            si[j] = (second - mu * mu).max(T::zero()).sqrt();
        }
        mean.push(mi);
        sd.push(si);
    }
    (mean, sd)
}

fn check_chains<T: Real>(chains: &[PosteriorDraws<T>]) -> Result<&PosteriorDraws<T>> {
    let first = chains.first().ok_or_else(|| Error::Config("no draws supplied".into()))?;
    if chains.iter().any(|c| c.individual_ids != first.individual_ids) {
        return Err(Error::Config("chains describe different individuals".into()));
    }
    Ok(first)
}

pub fn individual_moments<T: Real>(chains: &[PosteriorDraws<T>]) -> Result<IndividualMoments<T>> {
    check_chains(chains)?;
    let (beta_mean, beta_sd) = pool(
        &chains.iter().map(|c| &c.beta_mean).collect::<Vec<_>>(),
        &chains.iter().map(|c| &c.beta_sd).collect::<Vec<_>>(),
    );
    let (alpha_mean, alpha_sd) = pool(
        &chains.iter().map(|c| &c.alpha_mean).collect::<Vec<_>>(),
        &chains.iter().map(|c| &c.alpha_sd).collect::<Vec<_>>(),
    );
    Ok(IndividualMoments { beta_mean, beta_sd, alpha_mean, alpha_sd })
}

fn pooled_fixed<T: Real>(chains: &[PosteriorDraws<T>], f: usize) -> (T, T) {
    let values: Vec<T> = chains.iter().flat_map(|c| c.states.iter().map(move |s| s.fixed[f])).collect();
    let n = T::c(values.len() as f64);
    let mean = values.iter().copied().sum::<T>() / n;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    (mean, var.sqrt())
}

/// Choice log-likelihood at the posterior means of the fixed coefficients
/// and of each individual's coefficients and latent values.
pub fn plugin_choice_loglik<T: Real>(
    model: &CompiledModel,
    data: &ChoiceDataset<T>,
    chains: &[PosteriorDraws<T>],
) -> Result<T> {
    let first = check_chains(chains)?;
    if first.individual_ids.len() != data.len()
        || first.individual_ids.iter().zip(&data.individuals).any(|(a, b)| *a != b.id)
    {
        return Err(Error::Config("posterior and dataset describe different individuals".into()));
    }
    if chains.iter().any(|c| c.is_empty()) {
        return Err(Error::Config("a chain has no stored draws".into()));
    }
    let moments = individual_moments(chains)?;
    let mut state = ParameterState::zeros(model);
    state.fixed = (0..model.n_fixed()).map(|f| pooled_fixed(chains, f).0).collect();
    state.beta = moments.beta_mean;
    state.alpha = moments.alpha_mean;
    Ok(choice_loglik_total(model, data, &state))
}

/// Individual willingness to pay for `coefficient`, paired with its cost
/// coefficient. Uses stored individual draws when present and the posterior
/// moments otherwise.
pub fn mwtp_records<T: Real>(
    model: &CompiledModel,
    chains: &[PosteriorDraws<T>],
    coefficient: &str,
) -> Result<Vec<MwtpRecord<T>>> {
    let first = check_chains(chains)?;
    if chains.iter().any(|c| c.is_empty()) {
        return Err(Error::Config("a chain has no stored draws".into()));
    }
    let (slot_a, _) = model
        .coefficient(coefficient)
        .ok_or_else(|| Error::Config(format!("unknown coefficient '{coefficient}'")))?;
    let (slot_c, _) = model.cost_coefficient_for(coefficient)?;
    let ids = &first.individual_ids;

    if chains.iter().all(|c| c.has_individual_draws()) {
        return ids
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let states = chains.iter().flat_map(|c| c.states.iter());
                let a: Vec<T> = states.clone().map(|s| s.coefficient(slot_a, Some(i))).collect();
                let c: Vec<T> = states.map(|s| s.coefficient(slot_c, Some(i))).collect();
                mwtp_individual(id, coefficient, &a, &c)
            })
            .collect();
    }

    let moments = individual_moments(chains)?;
    let moment = |slot: Slot, i: usize| match slot {
        Slot::Fixed(f) => pooled_fixed(chains, f),
        Slot::Random(k) => (moments.beta_mean[i][k], moments.beta_sd[i][k]),
    };
    Ok(ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let (mean_a, _) = moment(slot_a, i);
            let (mean_c, sd_c) = moment(slot_c, i);
            mwtp_from_moments(id, coefficient, mean_a, mean_c, sd_c)
        })
        .collect())
}
