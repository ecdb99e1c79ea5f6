//! Market-share prediction and what-if attribute perturbations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::data::ChoiceDataset;
use crate::model::kernels::{mnl_probabilities, structural_mean, utilities_into};
use crate::model::spec::CompiledModel;
use crate::model::state::ParameterState;
use crate::real::Real;
use crate::rng::stream_seed;
use crate::sampler::chain::PosteriorDraws;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub attribute: String,
    pub alternatives: Vec<String>,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub perturbations: Vec<Perturbation>,
}

impl ScenarioSpec {
    pub fn validate<T: Real>(&self, data: &ChoiceDataset<T>) -> Result<()> {
        for p in &self.perturbations {
            if !(p.multiplier > 0.0 && p.multiplier.is_finite()) {
                return Err(Error::Config(format!(
                    "scenario '{}': multiplier for '{}' must be positive, got {}",
                    self.name, p.attribute, p.multiplier
                )));
            }
            if !data.attribute_names.contains(&p.attribute) {
                return Err(Error::Config(format!("scenario '{}': unknown attribute '{}'", self.name, p.attribute)));
            }
            if p.alternatives.is_empty() {
                return Err(Error::Config(format!(
                    "scenario '{}': perturbation of '{}' targets no alternative",
                    self.name, p.attribute
                )));
            }
            for a in &p.alternatives {
                if !data.alternative_ids.contains(a) {
                    return Err(Error::Config(format!("scenario '{}': unknown alternative '{a}'", self.name)));
                }
            }
        }
        Ok(())
    }

    /// Same perturbations with reciprocal multipliers, in reverse order.
    pub fn inverse(&self) -> Self {
        Self {
            name: format!("{} (inverse)", self.name),
            perturbations: self
                .perturbations
                .iter()
                .rev()
                .map(|p| Perturbation { multiplier: 1.0 / p.multiplier, ..p.clone() })
                .collect(),
        }
    }
}

/// Copy of `data` with the targeted attribute cells multiplied.
pub fn apply_perturbation<T: Real>(data: &ChoiceDataset<T>, scenario: &ScenarioSpec) -> Result<ChoiceDataset<T>> {
    scenario.validate(data)?;
    let mut out = data.clone();
    for p in &scenario.perturbations {
        let k = data.attribute_names.iter().position(|n| *n == p.attribute).expect("validated");
        let m = T::c(p.multiplier);
        for alt in &p.alternatives {
            let a = data.alternative_ids.iter().position(|n| n == alt).expect("validated");
            for ind in &mut out.individuals {
                ind.attributes[a][k] = ind.attributes[a][k] * m;
            }
        }
    }
    Ok(out)
}

/// Individual-level coefficients and latent values for one posterior state.
/// Stored individual draws are used when present; otherwise they are
/// simulated from the population distributions with streams keyed by
/// `(seed, draw, individual)`, so every dataset sees the same simulated values.
fn individual_values<T: Real>(
    model: &CompiledModel,
    data: &ChoiceDataset<T>,
    state: &ParameterState<T>,
    draw: usize,
    seed: u64,
) -> Result<(Vec<Vec<T>>, Vec<Vec<T>>)> {
    let n = data.len();
    let have_beta = state.beta.len() == n || model.n_random() == 0;
    let have_alpha = state.alpha.len() == n || model.n_latent() == 0;
    if have_beta && have_alpha {
        let beta = if state.beta.len() == n { state.beta.clone() } else { vec![Vec::new(); n] };
        let alpha = if state.alpha.len() == n { state.alpha.clone() } else { vec![Vec::new(); n] };
        return Ok((beta, alpha));
    }
    let chol = state
        .omega
        .cholesky()
        .map_err(|_| Error::Numeric(format!("draw {draw}: omega is not positive definite")))?;
    let mut beta = Vec::with_capacity(n);
    let mut alpha = Vec::with_capacity(n);
    for (i, ind) in data.individuals.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &[draw as u64, i as u64]));
        let mut a = structural_mean(&state.gamma, &ind.z)?;
        for v in a.iter_mut() {
            *v = *v + T::sample_standard_normal(&mut rng);
        }
        let eps: Vec<T> = (0..model.n_random()).map(|_| T::sample_standard_normal(&mut rng)).collect();
        let b: Vec<T> = state.mu.iter().zip(chol.mul_vec(&eps)).map(|(&m, d)| m + d).collect();
        beta.push(if state.beta.len() == n { state.beta[i].clone() } else { b });
        alpha.push(if state.alpha.len() == n { state.alpha[i].clone() } else { a });
    }
    Ok((beta, alpha))
}

/// Predicted shares in percent for a list of parameter states.
pub fn predict_shares_for_states<T: Real>(
    model: &CompiledModel,
    data: &ChoiceDataset<T>,
    states: &[&ParameterState<T>],
    seed: u64,
) -> Result<Vec<T>> {
    if states.is_empty() {
        return Err(Error::Config("no posterior draws to predict from".into()));
    }
    if data.is_empty() {
        return Err(Error::Validation("dataset has no individuals".into()));
    }
    let mut totals = vec![T::zero(); model.n_alternatives()];
    let mut utilities = Vec::new();
    for (s, state) in states.iter().enumerate() {
        let (beta, alpha) = individual_values(model, data, state, s, seed)?;
        for (i, ind) in data.individuals.iter().enumerate() {
            utilities_into(model, ind, &state.fixed, &beta[i], &alpha[i], &mut utilities);
            let probs = mnl_probabilities(&utilities)
                .map_err(|e| Error::Numeric(format!("individual {}: {e}", ind.id)))?;
            for (&a, p) in ind.available.iter().zip(probs) {
                totals[a] = totals[a] + p;
            }
        }
    }
    let denom = T::c((states.len() * data.len()) as f64);
    Ok(totals.into_iter().map(|t| T::c(100.0) * t / denom).collect())
}

/// Predicted shares in percent averaged over every stored draw of every chain.
pub fn predict_market_share<T: Real>(
    model: &CompiledModel,
    data: &ChoiceDataset<T>,
    draws: &[PosteriorDraws<T>],
    seed: u64,
) -> Result<Vec<T>> {
    let states: Vec<&ParameterState<T>> = draws.iter().flat_map(|d| d.states.iter()).collect();
    predict_shares_for_states(model, data, &states, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioShares<T> {
    pub name: String,
    pub shares: Vec<T>,
    /// Percentage-point change against the baseline prediction.
    pub delta: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareTable<T> {
    pub alternatives: Vec<String>,
    pub observed: Vec<T>,
    pub baseline: Vec<T>,
    pub scenarios: Vec<ScenarioShares<T>>,
}

/// Observed, baseline and per-scenario shares. Every scenario is evaluated
/// against the same posterior draws and simulation seed as the baseline.
pub fn share_delta_table<T: Real>(
    model: &CompiledModel,
    data: &ChoiceDataset<T>,
    draws: &[PosteriorDraws<T>],
    scenarios: &[ScenarioSpec],
    seed: u64,
) -> Result<ShareTable<T>> {
    for s in scenarios {
        s.validate(data)?;
    }
    let states: Vec<&ParameterState<T>> = draws.iter().flat_map(|d| d.states.iter()).collect();
    share_delta_table_for_states(model, data, &states, scenarios, seed)
}

pub fn share_delta_table_for_states<T: Real>(
    model: &CompiledModel,
    data: &ChoiceDataset<T>,
    states: &[&ParameterState<T>],
    scenarios: &[ScenarioSpec],
    seed: u64,
) -> Result<ShareTable<T>> {
    let baseline = predict_shares_for_states(model, data, states, seed)?;
    let rows = scenarios
        .iter()
        .map(|s| {
            let perturbed = apply_perturbation(data, s)?;
            let shares = predict_shares_for_states(model, &perturbed, states, seed)?;
            let delta = shares.iter().zip(&baseline).map(|(&a, &b)| a - b).collect();
            Ok(ScenarioShares { name: s.name.clone(), shares, delta })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ShareTable {
        alternatives: data.alternative_ids.clone(),
        observed: data.observed_shares(),
        baseline,
        scenarios: rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::data::Individual;
    use crate::model::spec::ModelSpec;

    fn two_alt_model() -> CompiledModel {
        let spec: ModelSpec = toml::from_str(
            r#"
            asc_reference = "a"
            cost_attribute = "cost"
            [[alternatives]]
            id = "a"
            [[alternatives]]
            id = "b"
            [[alternatives]]
            id = "c"
            [[utility_terms]]
            variable = "cost"
            applies_to = ["a", "b", "c"]
            "#,
        )
        .unwrap();
        spec.compile().unwrap()
    }

    fn dataset(model: &CompiledModel, available: Vec<usize>) -> ChoiceDataset<f64> {
        let mut d = ChoiceDataset::empty(model);
        for i in 0..4 {
            d.individuals.push(Individual {
                id: i.to_string(),
                z: vec![],
                available: available.clone(),
                chosen: available[i % available.len()],
                responses: vec![],
                attributes: vec![vec![3.0], vec![3.0], vec![3.0]],
            });
        }
        d
    }

    #[test]
    fn symmetric_alternatives_split_evenly() {
        let m = two_alt_model();
        let d = dataset(&m, vec![0, 1]);
        let mut state = ParameterState::zeros(&m);
        state.fixed = vec![0.0, 0.0, -0.5];
        let shares = predict_shares_for_states(&m, &d, &[&state], 1).unwrap();
        assert_eq!(shares, vec![50.0, 50.0, 0.0]);
    }

    #[test]
    fn perturbation_targets_cells_only() {
        let m = two_alt_model();
        let d = dataset(&m, vec![0, 1, 2]);
        let s = ScenarioSpec {
            name: "x".into(),
            perturbations: vec![Perturbation { attribute: "cost".into(), alternatives: vec!["b".into()], multiplier: 2.0 }],
        };
        let p = apply_perturbation(&d, &s).unwrap();
        assert_eq!(p.individuals[0].attributes, vec![vec![3.0], vec![6.0], vec![3.0]]);
        assert_eq!(d.individuals[0].attributes[1][0], 3.0);
        assert_eq!(apply_perturbation(&p, &s.inverse()).unwrap(), d);
        let unit = ScenarioSpec { name: "u".into(), perturbations: vec![Perturbation { multiplier: 1.0, ..s.perturbations[0].clone() }] };
        assert_eq!(apply_perturbation(&d, &unit).unwrap(), d);
    }

    #[test]
    fn invalid_scenarios_rejected() {
        let m = two_alt_model();
        let d = dataset(&m, vec![0, 1]);
        let bad = |attribute: &str, alt: &str, multiplier: f64| ScenarioSpec {
            name: "bad".into(),
            perturbations: vec![Perturbation { attribute: attribute.into(), alternatives: vec![alt.into()], multiplier }],
        };
        assert!(apply_perturbation(&d, &bad("fare", "a", 1.5)).is_err());
        assert!(apply_perturbation(&d, &bad("cost", "z", 1.5)).is_err());
        assert!(apply_perturbation(&d, &bad("cost", "a", 0.0)).is_err());
        assert!(apply_perturbation(&d, &bad("cost", "a", f64::NAN)).is_err());
    }

    #[test]
    fn empty_and_null_scenarios() {
        let m = two_alt_model();
        let d = dataset(&m, vec![0, 1, 2]);
        let mut state = ParameterState::zeros(&m);
        state.fixed = vec![0.3, -0.2, -0.4];
        let t = share_delta_table_for_states(&m, &d, &[&state], &[], 1).unwrap();
        assert!(t.scenarios.is_empty());
        assert_eq!(t.observed.len(), 3);
        let null = ScenarioSpec {
            name: "null".into(),
            perturbations: vec![Perturbation { attribute: "cost".into(), alternatives: vec!["a".into()], multiplier: 1.0 }],
        };
        let t = share_delta_table_for_states(&m, &d, &[&state], &[null], 1).unwrap();
        assert!(t.scenarios[0].delta.iter().all(|v| v.abs() < 1e-9));
        assert!((t.baseline.iter().sum::<f64>() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn empty_draws_rejected() {
        let m = two_alt_model();
        let d = dataset(&m, vec![0, 1]);
        assert!(predict_shares_for_states(&m, &d, &[], 1).is_err());
    }
}
