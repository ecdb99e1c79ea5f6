use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::spec::{CompiledModel, Source};
use crate::real::Real;

/// One respondent. Index spaces follow the [`CompiledModel`] the dataset was
/// loaded against.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual<T> {
    pub id: String,
    /// Structural covariates, aligned with `CompiledModel::covariate_names`.
    pub z: Vec<T>,
    /// Available alternative indices, ascending.
    pub available: Vec<usize>,
    pub chosen: usize,
    /// Collapsed, zero-based response category per indicator; `None` when not answered.
    pub responses: Vec<Option<u8>>,
    /// `attributes[alternative][attribute]`; NaN where not supplied.
    pub attributes: Vec<Vec<T>>,
}

impl<T: Real> Individual<T> {
    /// Position of the chosen alternative inside `available`.
    pub fn chosen_position(&self) -> usize {
        self.available
            .iter()
            .position(|&a| a == self.chosen)
            .expect("chosen alternative is available")
    }

    pub fn is_available(&self, alternative: usize) -> bool {
        self.available.binary_search(&alternative).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceDataset<T> {
    pub alternative_ids: Vec<String>,
    pub attribute_names: Vec<String>,
    pub covariate_names: Vec<String>,
    pub indicator_ids: Vec<String>,
    pub individuals: Vec<Individual<T>>,
}

impl<T: Real> ChoiceDataset<T> {
    /// Empty dataset whose column layout follows `model`.
    pub fn empty(model: &CompiledModel) -> Self {
        Self {
            alternative_ids: model.alternative_ids.clone(),
            attribute_names: model.attribute_names.clone(),
            covariate_names: model.covariate_names.clone(),
            indicator_ids: model.indicators.iter().map(|i| i.id.clone()).collect(),
            individuals: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    /// Checks every invariant the likelihood code relies on.
    pub fn validate(&self, model: &CompiledModel) -> Result<()> {
        let data = |m: String| Err(Error::Validation(m));
        if self.individuals.is_empty() {
            return data("dataset has no individuals".into());
        }
        if self.alternative_ids != model.alternative_ids
            || self.attribute_names != model.attribute_names
            || self.covariate_names != model.covariate_names
            || self.indicator_ids.len() != model.n_indicators()
            || self.indicator_ids.iter().zip(&model.indicators).any(|(a, b)| *a != b.id)
        {
            return data("dataset columns do not match the model layout".into());
        }
        let mut ids = BTreeSet::new();
        for ind in &self.individuals {
            if !ids.insert(ind.id.as_str()) {
                return data(format!("duplicate individual id '{}'", ind.id));
            }
            if ind.available.is_empty() {
                return data(format!("individual {} has no available alternative", ind.id));
            }
            if ind.available.windows(2).any(|w| w[0] >= w[1])
                || ind.available.iter().any(|&a| a >= model.n_alternatives())
            {
                return data(format!("individual {}: malformed availability set", ind.id));
            }
            if !ind.is_available(ind.chosen) {
                return data(format!("chosen alternative unavailable for individual {}", ind.id));
            }
            if ind.z.len() != model.n_covariates() || ind.z.iter().any(|v| !v.is_finite()) {
                return data(format!("individual {}: covariates missing or non-finite", ind.id));
            }
            if ind.responses.len() != model.n_indicators() {
                return data(format!("individual {}: wrong number of indicator slots", ind.id));
            }
            for (q, r) in ind.responses.iter().enumerate() {
                if let Some(c) = r {
                    if *c as usize >= model.indicators[q].categories {
                        return data(format!(
                            "individual {}: response category out of range for indicator {}",
                            ind.id, model.indicators[q].id
                        ));
                    }
                }
            }
            if ind.attributes.len() != model.n_alternatives()
                || ind.attributes.iter().any(|row| row.len() != model.attribute_names.len())
            {
                return data(format!("individual {}: attribute table has the wrong shape", ind.id));
            }
            for &a in &ind.available {
                for term in &model.terms[a] {
                    if let Source::Attribute(k) = term.source {
                        if !ind.attributes[a][k].is_finite() {
                            return data(format!(
                                "individual {}: attribute '{}' missing for alternative '{}'",
                                ind.id, model.attribute_names[k], model.alternative_ids[a]
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Observed choice shares in percent.
    pub fn observed_shares(&self) -> Vec<T> {
        let mut counts = vec![0usize; self.alternative_ids.len()];
        for ind in &self.individuals {
            counts[ind.chosen] += 1;
        }
        let n = T::c(self.individuals.len().max(1) as f64);
        counts.iter().map(|&c| T::c(100.0) * T::c(c as f64) / n).collect()
    }

    /// Choice log-likelihood of the equal-probability model over each availability set.
    pub fn null_loglik(&self) -> T {
        self.individuals
            .iter()
            .map(|ind| -T::c(ind.available.len() as f64).ln())
            .sum()
    }
}
