use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::spec::{Coefficient, CompiledModel, Source};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior<T> {
    pub mean: T,
    pub variance: T,
}

impl<T: Real> NormalPrior<T> {
    pub fn diffuse() -> Self {
        Self { mean: T::zero(), variance: T::c(100.0) }
    }

    #[inline]
    pub fn log_density(&self, x: T) -> T {
        let d = x - self.mean;
        -d * d / (T::c(2.0) * self.variance)
    }
}

/// Prior hyperparameters. Normal priors on `tau` apply to the first
/// threshold and to the log-increments between consecutive thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct Priors<T> {
    pub gamma: NormalPrior<T>,
    pub zeta: NormalPrior<T>,
    pub tau: NormalPrior<T>,
    pub fixed: NormalPrior<T>,
    pub mu: NormalPrior<T>,
    /// Inverse-Wishart degrees of freedom are `n_random + omega_df_offset`.
    pub omega_df_offset: T,
    /// Inverse-Wishart scale matrix is `omega_scale · I`.
    pub omega_scale: T,
    /// Inverse-Gamma shape and scale per dimension in diagonal mode.
    pub omega_shape: T,
    pub omega_rate: T,
    /// Restrict the first loading of each latent variable to be non-negative.
    /// Removes the sign reflection `(α, Γ, ζ, Λ) → −(α, Γ, ζ, Λ)`.
    pub anchor_first_loading: bool,
    /// Per-parameter overrides keyed by population parameter name
    /// (`gamma.*`, `zeta.*`, `tau.*`, `fixed.*`, `mu.*`).
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, NormalPrior<T>>,
}

impl<T: Real> Default for Priors<T> {
    fn default() -> Self {
        Self {
            gamma: NormalPrior::diffuse(),
            zeta: NormalPrior::diffuse(),
            tau: NormalPrior::diffuse(),
            fixed: NormalPrior::diffuse(),
            mu: NormalPrior::diffuse(),
            omega_df_offset: T::c(2.0),
            omega_scale: T::one(),
            omega_shape: T::c(2.0),
            omega_rate: T::one(),
            anchor_first_loading: true,
            overrides: BTreeMap::new(),
        }
    }
}

/// Initial random-walk step sizes per block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct ProposalScales<T> {
    pub alpha: T,
    pub zeta: T,
    pub tau: T,
    pub fixed: T,
    pub beta: T,
    /// Common translation of `μ` and every `β_i`.
    pub population_shift: T,
    /// Common log-scale change of `ω` and every `β_i − μ`.
    pub population_scale: T,
}

impl<T: Real> Default for ProposalScales<T> {
    fn default() -> Self {
        Self {
            alpha: T::c(0.8),
            zeta: T::c(0.1),
            tau: T::c(0.05),
            fixed: T::c(0.05),
            beta: T::c(0.5),
            population_shift: T::c(0.05),
            population_scale: T::c(0.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct SamplerConfig<T> {
    pub n_sweeps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub n_chains: usize,
    pub proposal_scales: ProposalScales<T>,
    pub adapt_during_burn_in: bool,
    /// Keep per-individual `beta` and `alpha` in every stored state.
    pub store_individual_draws: bool,
    /// Drop every likelihood term so each block samples its prior; the
    /// conjugate blocks then ignore the individual-level draws as well.
    pub prior_only: bool,
    pub priors: Priors<T>,
}

impl<T: Real> Default for SamplerConfig<T> {
    fn default() -> Self {
        Self {
            n_sweeps: 20_000,
            burn_in: 10_000,
            thin: 1,
            seed: 1,
            n_chains: 1,
            proposal_scales: ProposalScales::default(),
            adapt_during_burn_in: true,
            store_individual_draws: false,
            prior_only: false,
            priors: Priors::default(),
        }
    }
}

impl<T: Real> SamplerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_sweeps == 0 {
            return bad("n_sweeps must be positive");
        }
        if self.burn_in >= self.n_sweeps {
            return bad("burn_in must be smaller than n_sweeps");
        }
        if self.thin == 0 {
            return bad("thin must be positive");
        }
        if self.n_chains == 0 {
            return bad("n_chains must be positive");
        }
        let s = &self.proposal_scales;
        if [s.alpha, s.zeta, s.tau, s.fixed, s.beta, s.population_shift, s.population_scale].iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return bad("proposal scales must be finite and non-negative");
        }
        let p = &self.priors;
        let normals = [p.gamma, p.zeta, p.tau, p.fixed, p.mu];
        if normals
            .iter()
            .chain(p.overrides.values())
            .any(|n| !n.mean.is_finite() || !(n.variance > T::zero()) || !n.variance.is_finite())
        {
            return bad("normal priors need finite means and positive variances");
        }
        if !(p.omega_df_offset > T::zero()) || !(p.omega_scale > T::zero()) {
            return bad("inverse-Wishart prior needs positive df offset and scale");
        }
        if !(p.omega_shape > T::zero()) || !(p.omega_rate > T::zero()) {
            return bad("inverse-gamma prior needs positive shape and scale");
        }
        Ok(())
    }

    /// Number of states a run retains: ⌊(n_sweeps − burn_in) / thin⌋.
    pub fn stored_count(&self) -> usize {
        (self.n_sweeps - self.burn_in) / self.thin
    }

    pub fn cast<U: Real>(&self) -> SamplerConfig<U> {
        let n = |p: NormalPrior<T>| NormalPrior { mean: U::c(p.mean.to_f64_lossy()), variance: U::c(p.variance.to_f64_lossy()) };
        let u = |v: T| U::c(v.to_f64_lossy());
        let s = &self.proposal_scales;
        let p = &self.priors;
        SamplerConfig {
            n_sweeps: self.n_sweeps,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            n_chains: self.n_chains,
            proposal_scales: ProposalScales {
                alpha: u(s.alpha),
                zeta: u(s.zeta),
                tau: u(s.tau),
                fixed: u(s.fixed),
                beta: u(s.beta),
                population_shift: u(s.population_shift),
                population_scale: u(s.population_scale),
            },
            adapt_during_burn_in: self.adapt_during_burn_in,
            store_individual_draws: self.store_individual_draws,
            prior_only: self.prior_only,
            priors: Priors {
                gamma: n(p.gamma),
                zeta: n(p.zeta),
                tau: n(p.tau),
                fixed: n(p.fixed),
                mu: n(p.mu),
                omega_df_offset: u(p.omega_df_offset),
                omega_scale: u(p.omega_scale),
                omega_shape: u(p.omega_shape),
                omega_rate: u(p.omega_rate),
                anchor_first_loading: p.anchor_first_loading,
                overrides: p.overrides.iter().map(|(k, v)| (k.clone(), n(*v))).collect(),
            },
        }
    }
}

/// Priors expanded to one entry per sampled scalar.
#[derive(Debug, Clone)]
pub struct ResolvedPriors<T> {
    /// Per latent variable, one prior per attached covariate.
    pub gamma: Vec<Vec<NormalPrior<T>>>,
    pub zeta: Vec<NormalPrior<T>>,
    /// Per indicator, priors on (τ₁, log-increments).
    pub tau: Vec<Vec<NormalPrior<T>>>,
    pub fixed: Vec<NormalPrior<T>>,
    pub mu: Vec<NormalPrior<T>>,
    /// Indicators whose loading is restricted to be non-negative.
    pub anchored: Vec<bool>,
    /// Per latent variable, whether its anchor is enforced by reflecting the
    /// whole latent block (priors symmetric under the sign flip) rather
    /// than by truncating the loading.
    pub reflected: Vec<bool>,
    pub omega_df: T,
    pub omega_scale: T,
    pub omega_shape: T,
    pub omega_rate: T,
}

impl<T: Real> ResolvedPriors<T> {
    pub fn resolve(model: &CompiledModel, priors: &Priors<T>) -> Result<Self> {
        let mut used = std::collections::BTreeSet::new();
        let mut pick = |name: String, default: NormalPrior<T>| match priors.overrides.get(&name) {
            Some(p) => {
                used.insert(name);
                *p
            }
            None => default,
        };
        let gamma: Vec<Vec<NormalPrior<T>>> = model
            .latent_covariates
            .iter()
            .enumerate()
            .map(|(l, covs)| {
                covs.iter()
                    .map(|&c| {
                        pick(format!("gamma.{}.{}", model.latent_names[l], model.covariate_names[c]), priors.gamma)
                    })
                    .collect()
            })
            .collect();
        let zeta: Vec<NormalPrior<T>> = model.indicators.iter().map(|i| pick(format!("zeta.{}", i.id), priors.zeta)).collect();
        let tau = model
            .indicators
            .iter()
            .map(|i| (1..i.categories).map(|k| pick(format!("tau.{}.{k}", i.id), priors.tau)).collect())
            .collect();
        let fixed: Vec<NormalPrior<T>> = model.fixed.iter().map(|c| pick(format!("fixed.{}", c.name), priors.fixed)).collect();
        let mu: Vec<NormalPrior<T>> = model.random.iter().map(|c| pick(format!("mu.{}", c.name), priors.mu)).collect();
        if let Some(unknown) = priors.overrides.keys().find(|k| !used.contains(*k)) {
            return Err(Error::Config(format!("prior override for unknown parameter '{unknown}'")));
        }
        let anchored: Vec<bool> = (0..model.n_indicators())
            .map(|q| priors.anchor_first_loading && model.latent_indicators[model.indicators[q].latent][0] == q)
            .collect();
        let centred = |p: &NormalPrior<T>| p.mean == T::zero();
        let reflected = (0..model.n_latent())
            .map(|l| {
                let indicators = &model.latent_indicators[l];
                let coefficients_centred = |coefs: &[Coefficient], priors: &[NormalPrior<T>]| {
                    coefs.iter().zip(priors).all(|(c, p)| c.source != Source::Latent(l) || centred(p))
                };
                indicators.first().is_some_and(|&q| anchored[q])
                    && gamma[l].iter().all(centred)
                    && indicators.iter().all(|&q| centred(&zeta[q]))
                    && coefficients_centred(&model.fixed, &fixed)
                    && coefficients_centred(&model.random, &mu)
            })
            .collect();
        Ok(Self {
            reflected,
            gamma,
            zeta,
            tau,
            fixed,
            mu,
            anchored,
            omega_df: T::c(model.n_random() as f64) + priors.omega_df_offset,
            omega_scale: priors.omega_scale,
            omega_shape: priors.omega_shape,
            omega_rate: priors.omega_rate,
        })
    }
}
