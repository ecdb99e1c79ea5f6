//! Declarative model description and its compiled coefficient layout.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub id: String,
    #[serde(default)]
    pub display_name: String,
}

/// One Likert item. `levels` lists the surveyed levels kept as categories
/// after collapsing empty extremes; it defaults to `1..=categories`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSpec {
    pub id: String,
    pub categories: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<u8>>,
}

impl IndicatorSpec {
    pub fn levels(&self) -> Vec<u8> {
        self.levels
            .clone()
            .unwrap_or_else(|| (1..=self.categories as u8).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentVariableSpec {
    pub name: String,
    #[serde(default)]
    pub structural_covariates: Vec<String>,
    pub indicators: Vec<IndicatorSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientKind {
    Fixed,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityTerm {
    /// Attribute column or latent-variable name.
    pub variable: String,
    pub applies_to: Vec<String>,
    /// Defaults to fixed for attributes and to `lv_random` for latent variables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<CoefficientKind>,
    /// One coefficient across `applies_to` (generic) versus one per alternative.
    #[serde(default = "default_true")]
    pub shared: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMode {
    #[default]
    Diagonal,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub alternatives: Vec<Alternative>,
    #[serde(default)]
    pub latent_variables: Vec<LatentVariableSpec>,
    pub utility_terms: Vec<UtilityTerm>,
    /// Alternative whose constant is pinned to zero.
    pub asc_reference: String,
    #[serde(default = "default_asc_kind")]
    pub asc_kind: CoefficientKind,
    pub cost_attribute: String,
    #[serde(default)]
    pub lv_random: bool,
    #[serde(default)]
    pub covariance: CovarianceMode,
}

fn default_asc_kind() -> CoefficientKind {
    CoefficientKind::Fixed
}

/// Where a utility contribution takes its multiplier from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Constant,
    Attribute(usize),
    Latent(usize),
}

/// Position of a coefficient in the fixed vector or in β_i.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Fixed(usize),
    Random(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermRef {
    pub source: Source,
    pub slot: Slot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub name: String,
    pub variable: String,
    pub source: Source,
    pub alternatives: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorInfo {
    pub id: String,
    pub latent: usize,
    pub categories: usize,
    pub levels: Vec<u8>,
}

/// A validated [`ModelSpec`] with every name resolved to an index.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    spec: ModelSpec,
    pub alternative_ids: Vec<String>,
    pub reference: usize,
    pub attribute_names: Vec<String>,
    pub covariate_names: Vec<String>,
    pub latent_names: Vec<String>,
    /// Per latent variable, indices into `covariate_names`.
    pub latent_covariates: Vec<Vec<usize>>,
    /// Per latent variable, indices into `indicators`.
    pub latent_indicators: Vec<Vec<usize>>,
    pub indicators: Vec<IndicatorInfo>,
    pub fixed: Vec<Coefficient>,
    pub random: Vec<Coefficient>,
    /// Per alternative, the terms entering its systematic utility.
    pub terms: Vec<Vec<TermRef>>,
}

fn cfg(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ModelSpec {
    pub fn compile(&self) -> Result<CompiledModel> {
        CompiledModel::new(self.clone())
    }
}

impl CompiledModel {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        if spec.alternatives.len() < 2 {
            return Err(cfg("at least 2 alternatives are required"));
        }
        let alternative_ids: Vec<String> = spec.alternatives.iter().map(|a| a.id.clone()).collect();
        let alt_index: BTreeMap<&str, usize> =
            alternative_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        if alt_index.len() != alternative_ids.len() {
            return Err(cfg("alternative ids must be unique"));
        }
        if alternative_ids.iter().any(|id| id.trim().is_empty()) {
            return Err(cfg("alternative ids must be non-empty"));
        }
        let reference = *alt_index
            .get(spec.asc_reference.as_str())
            .ok_or_else(|| cfg(format!("unknown reference alternative '{}'", spec.asc_reference)))?;

        let mut latent_names = Vec::new();
        let mut covariate_names: Vec<String> = Vec::new();
        let mut latent_covariates = Vec::new();
        let mut latent_indicators = Vec::new();
        let mut indicators: Vec<IndicatorInfo> = Vec::new();
        let mut seen_ind = BTreeSet::new();
        for (l, lv) in spec.latent_variables.iter().enumerate() {
            if latent_names.contains(&lv.name) {
                return Err(cfg(format!("duplicate latent variable '{}'", lv.name)));
            }
            latent_names.push(lv.name.clone());
            let mut covs = Vec::new();
            for c in &lv.structural_covariates {
                let idx = match covariate_names.iter().position(|n| n == c) {
                    Some(i) => i,
                    None => {
                        covariate_names.push(c.clone());
                        covariate_names.len() - 1
                    }
                };
                if covs.contains(&idx) {
                    return Err(cfg(format!("covariate '{c}' listed twice for '{}'", lv.name)));
                }
                covs.push(idx);
            }
            latent_covariates.push(covs);
            if lv.indicators.is_empty() {
                return Err(cfg(format!("latent variable '{}' has no indicators", lv.name)));
            }
            let mut own = Vec::new();
            for ind in &lv.indicators {
                if !seen_ind.insert(ind.id.clone()) {
                    return Err(cfg(format!("indicator '{}' belongs to more than one latent variable", ind.id)));
                }
                if !(2..=5).contains(&ind.categories) {
                    return Err(cfg(format!(
                        "indicator '{}' must have 2 to 5 categories, got {}",
                        ind.id, ind.categories
                    )));
                }
                let levels = ind.levels();
                if levels.len() != ind.categories
                    || levels.windows(2).any(|w| w[0] >= w[1])
                    || levels.iter().any(|&v| !(1..=5).contains(&v))
                {
                    return Err(cfg(format!(
                        "indicator '{}': levels must be {} strictly increasing values in 1..=5",
                        ind.id, ind.categories
                    )));
                }
                own.push(indicators.len());
                indicators.push(IndicatorInfo {
                    id: ind.id.clone(),
                    latent: l,
                    categories: ind.categories,
                    levels,
                });
            }
            latent_indicators.push(own);
        }

        let n_alt = alternative_ids.len();
        let mut fixed: Vec<Coefficient> = Vec::new();
        let mut random: Vec<Coefficient> = Vec::new();
        let mut terms: Vec<Vec<TermRef>> = vec![Vec::new(); n_alt];

        for (a, id) in alternative_ids.iter().enumerate() {
            if a == reference {
                continue;
            }
            let coef = Coefficient {
                name: format!("asc_{id}"),
                variable: "asc".into(),
                source: Source::Constant,
                alternatives: vec![a],
            };
            let slot = push_coef(&mut fixed, &mut random, spec.asc_kind, coef);
            terms[a].push(TermRef { source: Source::Constant, slot });
        }

        let mut attribute_names: Vec<String> = Vec::new();
        let mut covered = BTreeSet::new();
        let var_count = spec.utility_terms.iter().fold(BTreeMap::new(), |mut m, t| {
            *m.entry(t.variable.as_str()).or_insert(0usize) += 1;
            m
        });
        for term in &spec.utility_terms {
            if term.applies_to.is_empty() {
                return Err(cfg(format!("term '{}' applies to no alternative", term.variable)));
            }
            let (source, default_kind) = match latent_names.iter().position(|n| *n == term.variable) {
                Some(l) => (
                    Source::Latent(l),
                    if spec.lv_random { CoefficientKind::Random } else { CoefficientKind::Fixed },
                ),
                None => {
                    if term.variable.trim().is_empty() || term.variable == "asc" {
                        return Err(cfg(format!("invalid term variable '{}'", term.variable)));
                    }
                    let idx = match attribute_names.iter().position(|n| *n == term.variable) {
                        Some(i) => i,
                        None => {
                            attribute_names.push(term.variable.clone());
                            attribute_names.len() - 1
                        }
                    };
                    (Source::Attribute(idx), CoefficientKind::Fixed)
                }
            };
            let kind = term.kind.unwrap_or(default_kind);
            let mut alts = Vec::new();
            for id in &term.applies_to {
                let a = *alt_index
                    .get(id.as_str())
                    .ok_or_else(|| cfg(format!("term '{}' references unknown alternative '{id}'", term.variable)))?;
                if !covered.insert((term.variable.clone(), a)) {
                    return Err(cfg(format!(
                        "('{}', '{id}') is covered by more than one utility term",
                        term.variable
                    )));
                }
                alts.push(a);
            }
            if term.shared {
                let name = if var_count[term.variable.as_str()] == 1 {
                    term.variable.clone()
                } else {
                    format!("{}@{}", term.variable, term.applies_to.join("+"))
                };
                let coef = Coefficient { name, variable: term.variable.clone(), source, alternatives: alts.clone() };
                let slot = push_coef(&mut fixed, &mut random, kind, coef);
                for &a in &alts {
                    terms[a].push(TermRef { source, slot });
                }
            } else {
                for &a in &alts {
                    let coef = Coefficient {
                        name: format!("{}@{}", term.variable, alternative_ids[a]),
                        variable: term.variable.clone(),
                        source,
                        alternatives: vec![a],
                    };
                    let slot = push_coef(&mut fixed, &mut random, kind, coef);
                    terms[a].push(TermRef { source, slot });
                }
            }
        }

        if !attribute_names.contains(&spec.cost_attribute) {
            return Err(cfg(format!(
                "cost attribute '{}' does not appear in the utility terms",
                spec.cost_attribute
            )));
        }

        Ok(Self {
            spec,
            alternative_ids,
            reference,
            attribute_names,
            covariate_names,
            latent_names,
            latent_covariates,
            latent_indicators,
            indicators,
            fixed,
            random,
            terms,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn n_alternatives(&self) -> usize {
        self.alternative_ids.len()
    }

    pub fn n_latent(&self) -> usize {
        self.latent_names.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn n_indicators(&self) -> usize {
        self.indicators.len()
    }

    pub fn n_fixed(&self) -> usize {
        self.fixed.len()
    }

    pub fn n_random(&self) -> usize {
        self.random.len()
    }

    pub fn covariance(&self) -> CovarianceMode {
        self.spec.covariance
    }

    pub fn alternative_index(&self, id: &str) -> Option<usize> {
        self.alternative_ids.iter().position(|a| a == id)
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attribute_names.iter().position(|a| a == name)
    }

    pub fn coefficient(&self, name: &str) -> Option<(Slot, &Coefficient)> {
        if let Some(i) = self.fixed.iter().position(|c| c.name == name) {
            return Some((Slot::Fixed(i), &self.fixed[i]));
        }
        self.random
            .iter()
            .position(|c| c.name == name)
            .map(|i| (Slot::Random(i), &self.random[i]))
    }

    /// Cost coefficient paired with `name` for willingness-to-pay ratios.
    ///
    /// A generic cost coefficient pairs with everything; alternative-specific
    /// cost coefficients pair with a coefficient that applies to exactly one
    /// alternative.
    pub fn cost_coefficient_for(&self, name: &str) -> Result<(Slot, &Coefficient)> {
        let (_, coef) = self
            .coefficient(name)
            .ok_or_else(|| cfg(format!("unknown coefficient '{name}'")))?;
        if coef.variable == self.spec.cost_attribute {
            return Err(cfg(format!("'{name}' is the cost coefficient itself")));
        }
        let costs: Vec<(Slot, &Coefficient)> = self
            .fixed
            .iter()
            .enumerate()
            .map(|(i, c)| (Slot::Fixed(i), c))
            .chain(self.random.iter().enumerate().map(|(i, c)| (Slot::Random(i), c)))
            .filter(|(_, c)| c.variable == self.spec.cost_attribute)
            .collect();
        if costs.len() == 1 {
            return Ok(costs[0]);
        }
        costs
            .into_iter()
            .find(|(_, c)| coef.alternatives.iter().all(|a| c.alternatives.contains(a)))
            .ok_or_else(|| cfg(format!("no cost coefficient covers the alternatives of '{name}'")))
    }

    /// Names of the population-level parameters in flattening order.
    pub fn population_names(&self) -> Vec<String> {
        let mut names = self.gamma_names();
        names.extend(self.zeta_names());
        names.extend(self.tau_names());
        names.extend(self.fixed_names());
        names.extend(self.mu_names());
        names.extend(self.omega_names());
        names
    }

    pub fn gamma_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (l, covs) in self.latent_covariates.iter().enumerate() {
            for &c in covs {
                out.push(format!("gamma.{}.{}", self.latent_names[l], self.covariate_names[c]));
            }
        }
        out
    }

    pub fn zeta_names(&self) -> Vec<String> {
        self.indicators.iter().map(|i| format!("zeta.{}", i.id)).collect()
    }

    pub fn tau_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for ind in &self.indicators {
            for k in 1..ind.categories {
                out.push(format!("tau.{}.{k}", ind.id));
            }
        }
        out
    }

    pub fn fixed_names(&self) -> Vec<String> {
        self.fixed.iter().map(|c| format!("fixed.{}", c.name)).collect()
    }

    pub fn mu_names(&self) -> Vec<String> {
        self.random.iter().map(|c| format!("mu.{}", c.name)).collect()
    }

    pub fn omega_names(&self) -> Vec<String> {
        let k = self.n_random();
        let mut out = Vec::new();
        for r in 0..k {
            match self.covariance() {
                CovarianceMode::Diagonal => {
                    out.push(format!("omega.{}.{}", self.random[r].name, self.random[r].name))
                }
                CovarianceMode::Full => {
                    for c in r..k {
                        out.push(format!("omega.{}.{}", self.random[r].name, self.random[c].name));
                    }
                }
            }
        }
        out
    }
}

fn push_coef(
    fixed: &mut Vec<Coefficient>,
    random: &mut Vec<Coefficient>,
    kind: CoefficientKind,
    coef: Coefficient,
) -> Slot {
    match kind {
        CoefficientKind::Fixed => {
            fixed.push(coef);
            Slot::Fixed(fixed.len() - 1)
        }
        CoefficientKind::Random => {
            random.push(coef);
            Slot::Random(random.len() - 1)
        }
    }
}
