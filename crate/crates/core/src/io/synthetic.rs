//! Synthetic datasets drawn from the model's own generative process.
//!
//! A truth file declares how covariates and attributes are generated, how
//! often each alternative is available, and the population parameters keyed
//! by their population names:
//!
//! ```toml
//! [covariates]
//! female = { kind = "bernoulli", p = 0.5 }
//! age = { kind = "normal", mean = 0.0, sd = 1.0 }
//!
//! [attributes]
//! cost = { kind = "uniform", low = 0.5, high = 2.0 }
//!
//! [attribute_overrides.bus]
//! cost = { kind = "constant", value = 0.3 }
//!
//! [availability]
//! car_on = 0.8
//!
//! [parameters]
//! "gamma.individualist.female" = 0.6
//! "mu.cost" = -1.0
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::dataset::write_dataset;
use crate::model::data::{ChoiceDataset, Individual};
use crate::model::kernels::{ordered_logit_pmf, predict_choice, structural_mean, utilities_into};
use crate::model::spec::{CompiledModel, Source};
use crate::model::state::ParameterState;
use crate::real::Real;
use crate::rng::stream_seed;

pub const TRUTH_FILE: &str = "truth.toml";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    Normal { mean: f64, sd: f64 },
    Uniform { low: f64, high: f64 },
    Bernoulli { p: f64 },
    Constant { value: f64 },
}

impl Generator {
    fn validate(&self, what: &str) -> Result<()> {
        let ok = match *self {
            Generator::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd >= 0.0,
            Generator::Uniform { low, high } => low.is_finite() && high.is_finite() && low <= high,
            Generator::Bernoulli { p } => (0.0..=1.0).contains(&p),
            Generator::Constant { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid generator for '{what}': {self:?}")))
        }
    }

    fn sample<T: Real, R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match *self {
            Generator::Normal { mean, sd } => T::c(mean) + T::c(sd) * T::sample_standard_normal(rng),
            Generator::Uniform { low, high } => T::c(low + (high - low) * rng.random::<f64>()),
            Generator::Bernoulli { p } => T::c((rng.random::<f64>() < p) as u8 as f64),
            Generator::Constant { value } => T::c(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    #[serde(default)]
    pub covariates: BTreeMap<String, Generator>,
    #[serde(default)]
    pub attributes: BTreeMap<String, Generator>,
    /// Per alternative, generators replacing the defaults in `attributes`.
    #[serde(default)]
    pub attribute_overrides: BTreeMap<String, BTreeMap<String, Generator>>,
    /// Probability that each alternative is available; missing means 1.
    #[serde(default)]
    pub availability: BTreeMap<String, f64>,
    pub parameters: BTreeMap<String, f64>,
}

impl TruthSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::parse(path, e))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("truth serializes")
    }

    /// Population parameters as a state; every population name is required.
    pub fn state<T: Real>(&self, model: &CompiledModel) -> Result<ParameterState<T>> {
        let names = model.population_names();
        if let Some(unknown) = self.parameters.keys().find(|k| !names.contains(k)) {
            return Err(Error::Config(format!("truth names unknown parameter '{unknown}'")));
        }
        let values = names
            .iter()
            .map(|n| {
                self.parameters
                    .get(n)
                    .map(|&v| T::c(v))
                    .ok_or_else(|| Error::Config(format!("truth lacks parameter '{n}'")))
            })
            .collect::<Result<Vec<T>>>()?;
        ParameterState::from_population_vector(model, &values)
    }

    pub fn set_state<T: Real>(&mut self, model: &CompiledModel, state: &ParameterState<T>) {
        self.parameters = model
            .population_names()
            .into_iter()
            .zip(state.population_vector(model))
            .map(|(n, v)| (n, v.to_f64_lossy()))
            .collect();
    }

    fn validate(&self, model: &CompiledModel) -> Result<()> {
        for c in &model.covariate_names {
            self.covariates
                .get(c)
                .ok_or_else(|| Error::Config(format!("truth lacks a generator for covariate '{c}'")))?
                .validate(c)?;
        }
        for a in &model.attribute_names {
            let default = self.attributes.get(a);
            for (alt_idx, alt) in model.alternative_ids.iter().enumerate() {
                if !uses_attribute(model, alt_idx, a) {
                    continue;
                }
                self.generator(alt, a)
                    .or(default)
                    .ok_or_else(|| Error::Config(format!("truth lacks a generator for attribute '{a}' of '{alt}'")))?
                    .validate(a)?;
            }
        }
        for (alt, attrs) in &self.attribute_overrides {
            if model.alternative_index(alt).is_none() {
                return Err(Error::Config(format!("attribute override for unknown alternative '{alt}'")));
            }
            if let Some(a) = attrs.keys().find(|a| model.attribute_index(a).is_none()) {
                return Err(Error::Config(format!("attribute override for unknown attribute '{a}'")));
            }
        }
        for (alt, p) in &self.availability {
            if model.alternative_index(alt).is_none() {
                return Err(Error::Config(format!("availability for unknown alternative '{alt}'")));
            }
            if !(0.0..=1.0).contains(p) {
                return Err(Error::Config(format!("availability of '{alt}' must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    fn generator(&self, alt: &str, attribute: &str) -> Option<&Generator> {
        self.attribute_overrides.get(alt).and_then(|m| m.get(attribute))
    }
}

fn uses_attribute(model: &CompiledModel, alt: usize, attribute: &str) -> bool {
    model.terms[alt]
        .iter()
        .any(|t| matches!(t.source, Source::Attribute(k) if model.attribute_names[k] == attribute))
}

/// Simulated dataset plus the individual-level truth behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData<T> {
    pub data: ChoiceDataset<T>,
    /// Population parameters with `beta` and `alpha` filled per individual.
    pub truth: ParameterState<T>,
}

/// Draws `n_individuals` respondents: covariates, latent values `Γz + η`,
/// coefficients from `N(μ, ω)`, choices as the utility argmax under EV1
/// noise, and ordered-logit indicator responses. Individual `i` uses its
/// own stream keyed by `(seed, i)`.
pub fn generate_synthetic<T: Real>(
    model: &CompiledModel,
    truth: &TruthSpec,
    n_individuals: usize,
    seed: u64,
) -> Result<SyntheticData<T>> {
    truth.validate(model)?;
    let mut state: ParameterState<T> = truth.state(model)?;
    state.validate(model)?;
    let chol = state
        .omega
        .cholesky()
        .map_err(|_| Error::Parameter("true omega is not positive definite".into()))?;
    let avail_p: Vec<f64> = model
        .alternative_ids
        .iter()
        .map(|a| truth.availability.get(a).copied().unwrap_or(1.0))
        .collect();

    let mut data = ChoiceDataset::empty(model);
    let mut utilities = Vec::new();
    for i in 0..n_individuals {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &[i as u64]));
        let z: Vec<T> = model.covariate_names.iter().map(|c| truth.covariates[c].sample(&mut rng)).collect();
        let attributes: Vec<Vec<T>> = model
            .alternative_ids
            .iter()
            .enumerate()
            .map(|(a, alt)| {
                model
                    .attribute_names
                    .iter()
                    .map(|name| {
                        if uses_attribute(model, a, name) {
                            truth.generator(alt, name).or(truth.attributes.get(name)).expect("validated").sample(&mut rng)
                        } else {
                            T::nan()
                        }
                    })
                    .collect()
            })
            .collect();
        let mut available: Vec<usize> = (0..model.n_alternatives())
            .filter(|&a| avail_p[a] >= 1.0 || rng.random::<f64>() < avail_p[a])
            .collect();
        if available.is_empty() {
            available.push(rng.random_range(0..model.n_alternatives()));
        }

        let mut alpha = structural_mean(&state.gamma, &z)?;
        for v in alpha.iter_mut() {
            *v = *v + T::sample_standard_normal(&mut rng);
        }
        let eps: Vec<T> = (0..model.n_random()).map(|_| T::sample_standard_normal(&mut rng)).collect();
        let beta: Vec<T> = state.mu.iter().zip(chol.mul_vec(&eps)).map(|(&m, d)| m + d).collect();

        let mut individual = Individual {
            id: (i + 1).to_string(),
            z,
            available,
            chosen: 0,
            responses: vec![None; model.n_indicators()],
            attributes,
        };
        utilities_into(model, &individual, &state.fixed, &beta, &alpha, &mut utilities);
        for u in utilities.iter_mut() {
            *u = *u + T::sample_gumbel(&mut rng);
        }
        individual.chosen = individual.available[predict_choice(&utilities)];

        for (q, info) in model.indicators.iter().enumerate() {
            let pmf = ordered_logit_pmf(state.zeta[q], alpha[info.latent], &state.tau[q])?;
            let u: f64 = rng.random();
            let mut cum = 0.0;
            let mut category = info.categories - 1;
            for (k, p) in pmf.iter().enumerate() {
                cum += p.to_f64_lossy();
                if u < cum {
                    category = k;
                    break;
                }
            }
            individual.responses[q] = Some(category as u8);
        }
        data.individuals.push(individual);
        state.beta.push(beta);
        state.alpha.push(alpha);
    }
    Ok(SyntheticData { data, truth: state })
}

/// Writes the dataset files and a copy of the truth file into `dir`.
pub fn write_synthetic<T: Real>(model: &CompiledModel, truth: &TruthSpec, synthetic: &SyntheticData<T>, dir: &Path) -> Result<()> {
    write_dataset(model, &synthetic.data, dir)?;
    let path = dir.join(TRUTH_FILE);
    std::fs::write(&path, truth.to_toml()).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::spec::ModelSpec;

    fn logit_model() -> CompiledModel {
        let spec: ModelSpec = toml::from_str(
            r#"
            asc_reference = "a"
            cost_attribute = "cost"
            alternatives = [{ id = "a" }, { id = "b" }]
            [[utility_terms]]
            variable = "cost"
            applies_to = ["a", "b"]
            [[latent_variables]]
            name = "lv"
            indicators = [{ id = "q1", categories = 2 }]
            "#,
        )
        .unwrap();
        spec.compile().unwrap()
    }

    fn truth() -> TruthSpec {
        toml::from_str(
            r#"
            [attributes]
            cost = { kind = "uniform", low = 1.0, high = 2.0 }
            [parameters]
            "zeta.q1" = 0.0
            "tau.q1.1" = 0.0
            "fixed.asc_b" = 1.0986122886681098
            "fixed.cost" = 0.0
            "#,
        )
        .unwrap()
    }

    #[test]
    fn closed_form_shares_and_even_split() {
        let m = logit_model();
        let s = generate_synthetic::<f64>(&m, &truth(), 100_000, 3).unwrap();
        let shares = s.data.observed_shares();
        assert!((shares[1] - 75.0).abs() < 1.0, "{shares:?}");
        let ones = s.data.individuals.iter().filter(|i| i.responses[0] == Some(1)).count();
        assert!((ones as f64 / 1000.0 - 50.0).abs() < 1.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let m = logit_model();
        let a = generate_synthetic::<f64>(&m, &truth(), 50, 11).unwrap();
        let b = generate_synthetic::<f64>(&m, &truth(), 50, 11).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic::<f64>(&m, &truth(), 50, 12).unwrap();
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn missing_or_unknown_parameters_rejected() {
        let m = logit_model();
        let mut t = truth();
        t.parameters.remove("fixed.cost");
        assert!(generate_synthetic::<f64>(&m, &t, 5, 1).is_err());
        let mut t = truth();
        t.parameters.insert("mu.nope".into(), 1.0);
        assert!(generate_synthetic::<f64>(&m, &t, 5, 1).is_err());
        let mut t = truth();
        t.attributes.clear();
        assert!(generate_synthetic::<f64>(&m, &t, 5, 1).is_err());
    }

    #[test]
    fn truth_round_trips_through_toml() {
        let t = truth();
        let back: TruthSpec = toml::from_str(&t.to_toml()).unwrap();
        assert_eq!(back, t);
    }
}
