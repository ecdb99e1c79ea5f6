//! Internal consistency of indicator groups.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::dataset::load_indicator_responses;
use crate::model::data::ChoiceDataset;
use crate::model::spec::CompiledModel;

/// Items of a group are acceptable above this alpha.
pub const ALPHA_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reliability {
    /// `None` when the item sums have zero variance.
    pub alpha: Option<f64>,
    pub pass: bool,
    pub zero_variance: bool,
    pub n_items: usize,
    pub n_respondents: usize,
}

fn variance(x: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = x.clone().count() as f64;
    let m = x.clone().sum::<f64>() / n;
    x.map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
}

/// Cronbach's alpha of `responses[respondent][item]`.
pub fn cronbach_alpha(responses: &[Vec<f64>]) -> Result<Reliability> {
    let n = responses.len();
    let k = responses.first().map_or(0, Vec::len);
    if k < 2 || n < 2 {
        return Err(Error::Config(format!(
            "reliability needs at least 2 items and 2 respondents, got {k} and {n}"
        )));
    }
    if responses.iter().any(|r| r.len() != k || r.iter().any(|v| !v.is_finite())) {
        return Err(Error::Validation("reliability needs complete responses".into()));
    }
    let item_var: f64 = (0..k).map(|j| variance(responses.iter().map(move |r| r[j]))).sum();
    let total_var = variance(responses.iter().map(|r| r.iter().sum::<f64>()));
    let zero_variance = total_var == 0.0;
    let alpha = (!zero_variance).then(|| (k as f64 / (k as f64 - 1.0)) * (1.0 - item_var / total_var));
    Ok(Reliability {
        alpha,
        pass: alpha.is_some_and(|a| a > ALPHA_THRESHOLD),
        zero_variance,
        n_items: k,
        n_respondents: n,
    })
}

/// Alpha per latent variable over respondents who answered all of its
/// indicators, using the surveyed levels. Latent variables with a single
/// indicator yield `None`.
pub fn latent_reliability(model: &CompiledModel, data: &ChoiceDataset<f64>) -> Vec<(String, Option<Result<Reliability>>)> {
    let responses: Vec<&[Option<u8>]> = data.individuals.iter().map(|ind| ind.responses.as_slice()).collect();
    reliability_of_responses(model, &responses)
}

/// As [`latent_reliability`] for an indicator file on its own.
pub fn indicator_file_reliability(model: &CompiledModel, path: &Path) -> Result<Vec<(String, Option<Result<Reliability>>)>> {
    let responses = load_indicator_responses(model, path)?;
    let rows: Vec<&[Option<u8>]> = responses.values().map(Vec::as_slice).collect();
    Ok(reliability_of_responses(model, &rows))
}

fn reliability_of_responses(model: &CompiledModel, responses: &[&[Option<u8>]]) -> Vec<(String, Option<Result<Reliability>>)> {
    model
        .latent_indicators
        .iter()
        .enumerate()
        .map(|(l, items)| {
            let name = model.latent_names[l].clone();
            if items.len() < 2 {
                return (name, None);
            }
            let rows: Vec<Vec<f64>> = responses
                .iter()
                .filter_map(|r| {
                    items
                        .iter()
                        .map(|&q| r[q].map(|c| model.indicators[q].levels[c as usize] as f64))
                        .collect::<Option<Vec<f64>>>()
                })
                .collect();
            (name, Some(cronbach_alpha(&rows)))
        })
        .collect()
}
