use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::data::ChoiceDataset;
use crate::model::likelihood::{choice_loglik, indicator_loglik};
use crate::model::spec::CompiledModel;
use crate::model::state::{check_thresholds, ParameterState};
use crate::posterior::summary::StreamingMoments;
use crate::real::Real;
use crate::rng::stream_seed;
use crate::sampler::blocks::{
    draw_alpha, draw_gamma, draw_measurement, draw_population_moves, draw_theta, tau_to_unconstrained, Context,
};
use crate::sampler::config::{ResolvedPriors, SamplerConfig};
use crate::sampler::mh::Proposal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockAcceptance {
    pub block: String,
    /// Post-burn-in acceptance rate.
    pub rate: f64,
    /// Proposal scale in effect after burn-in (mean over per-indicator proposals).
    pub scale: f64,
}

/// Retained output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws<T> {
    pub chain: usize,
    pub config: SamplerConfig<T>,
    /// Names of the flattened population-level parameters.
    pub parameter_names: Vec<String>,
    /// Stored states; `beta`/`alpha` are empty unless individual draws are kept.
    pub states: Vec<ParameterState<T>>,
    /// `states` flattened in `parameter_names` order.
    pub population: Vec<Vec<T>>,
    pub acceptance: Vec<BlockAcceptance>,
    pub individual_ids: Vec<String>,
    /// Posterior means and SDs of each individual's coefficients and latent
    /// values, accumulated over every post-burn-in sweep.
    pub beta_mean: Vec<Vec<T>>,
    pub beta_sd: Vec<Vec<T>>,
    pub alpha_mean: Vec<Vec<T>>,
    pub alpha_sd: Vec<Vec<T>>,
}

impl<T: Real> PosteriorDraws<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Draws of one population parameter.
    pub fn series(&self, name: &str) -> Option<Vec<T>> {
        let j = self.parameter_names.iter().position(|n| n == name)?;
        Some(self.population.iter().map(|row| row[j]).collect())
    }

    pub fn has_individual_draws(&self) -> bool {
        self.states.first().is_some_and(|s| s.has_individuals())
    }
}

/// Starting point: zero structural and loading coefficients, thresholds at
/// the logistic quantiles of the empirical category frequencies, `β_i = μ = 0`,
/// `ω = I`, `α_i = Γz_i = 0`.
pub fn initial_state<T: Real>(model: &CompiledModel, data: &ChoiceDataset<T>) -> ParameterState<T> {
    let mut state = ParameterState::zeros(model);
    for (q, info) in model.indicators.iter().enumerate() {
        let mut counts = vec![0.5f64; info.categories];
        for ind in &data.individuals {
            if let Some(c) = ind.responses[q] {
                counts[c as usize] += 1.0;
            }
        }
        let total: f64 = counts.iter().sum();
        let mut cum = 0.0;
        state.tau[q] = counts[..info.categories - 1]
            .iter()
            .map(|c| {
                cum += c / total;
                T::c((cum / (1.0 - cum)).ln())
            })
            .collect();
    }
    state.beta = vec![state.mu.clone(); data.len()];
    state.alpha = vec![vec![T::zero(); model.n_latent()]; data.len()];
    state
}

struct Proposals<T> {
    alpha: Proposal<T>,
    zeta: Vec<Proposal<T>>,
    tau: Vec<Proposal<T>>,
    fixed: Proposal<T>,
    beta: Proposal<T>,
    shift: Proposal<T>,
    scale: Proposal<T>,
}

impl<T: Real> Proposals<T> {
    fn new(model: &CompiledModel, config: &SamplerConfig<T>) -> Self {
        let s = &config.proposal_scales;
        Self {
            alpha: Proposal::new(s.alpha, model.n_latent()),
            zeta: model.indicators.iter().map(|_| Proposal::new(s.zeta, 1)).collect(),
            tau: model.indicators.iter().map(|i| Proposal::new(s.tau, i.categories - 1)).collect(),
            fixed: Proposal::new(s.fixed, model.n_fixed()),
            beta: Proposal::new(s.beta, model.n_random()),
            shift: Proposal::new(s.population_shift, model.n_random()),
            scale: Proposal::new(s.population_scale, model.n_random()),
        }
    }

    fn reset_counts(&mut self) {
        self.alpha.reset_counts();
        self.fixed.reset_counts();
        self.beta.reset_counts();
        self.shift.reset_counts();
        self.scale.reset_counts();
        self.zeta.iter_mut().chain(self.tau.iter_mut()).for_each(Proposal::reset_counts);
    }

    fn report(&self, model: &CompiledModel) -> Vec<BlockAcceptance> {
        let pooled = |ps: &[Proposal<T>]| {
            let n = ps.len().max(1) as f64;
            (
                ps.iter().map(Proposal::acceptance_rate).sum::<f64>() / n,
                ps.iter().map(|p| p.scale().to_f64_lossy()).sum::<f64>() / n,
            )
        };
        let mut out = Vec::new();
        let mut push = |block: &str, (rate, scale): (f64, f64)| {
            out.push(BlockAcceptance { block: block.into(), rate, scale })
        };
        let single = |p: &Proposal<T>| (p.acceptance_rate(), p.scale().to_f64_lossy());
        if model.n_latent() > 0 {
            push("alpha", single(&self.alpha));
        }
        if model.n_indicators() > 0 {
            push("zeta", pooled(&self.zeta));
            push("tau", pooled(&self.tau));
        }
        if model.n_fixed() > 0 {
            push("fixed", single(&self.fixed));
        }
        if model.n_random() > 0 {
            push("beta", single(&self.beta));
            push("mu_shift", single(&self.shift));
            push("omega_scale", single(&self.scale));
        }
        out
    }
}

fn check_initial<T: Real>(model: &CompiledModel, data: &ChoiceDataset<T>, state: &ParameterState<T>) -> Result<()> {
    let mut scratch = Vec::new();
    for (i, ind) in data.individuals.iter().enumerate() {
        let c = choice_loglik(model, ind, &state.fixed, &state.beta[i], &state.alpha[i], &mut scratch);
        if !c.is_finite() {
            return Err(Error::Initialization {
                block: "theta".into(),
                message: format!("non-finite choice log-likelihood for individual {}", ind.id),
            });
        }
        let m = indicator_loglik(model, ind, &state.zeta, &state.tau, &state.alpha[i]);
        if !m.is_finite() {
            return Err(Error::Initialization {
                block: "measurement".into(),
                message: format!("non-finite indicator log-likelihood for individual {}", ind.id),
            });
        }
    }
    Ok(())
}

/// Runs chain 0 of `config`.
pub fn run_chain<T: Real>(model: &CompiledModel, data: &ChoiceDataset<T>, config: &SamplerConfig<T>) -> Result<PosteriorDraws<T>> {
    run_chain_indexed(model, data, config, 0)
}

/// Runs every chain of `config`, one thread per chain. Chain `c` is seeded
/// from `(config.seed, c)`.
pub fn run_chains<T: Real>(
    model: &CompiledModel,
    data: &ChoiceDataset<T>,
    config: &SamplerConfig<T>,
) -> Result<Vec<PosteriorDraws<T>>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..config.n_chains)
            .map(|c| scope.spawn(move || run_chain_indexed(model, data, config, c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect()
    })
}

/// One chain: sweeps α → Γ → (ζ, τ) → θ, followed by the joint
/// population moves of [`draw_population_moves`], adapting proposal scales during
/// burn-in and retaining every `thin`-th post-burn-in state.
pub fn run_chain_indexed<T: Real>(
    model: &CompiledModel,
    data: &ChoiceDataset<T>,
    config: &SamplerConfig<T>,
    chain: usize,
) -> Result<PosteriorDraws<T>> {
    config.validate()?;
    data.validate(model)?;
    let priors = ResolvedPriors::resolve(model, &config.priors)?;
    let ctx = Context { model, data, priors: &priors, use_likelihood: !config.prior_only };

    let chain_seed = stream_seed(config.seed, &[chain as u64]);
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(chain_seed, &[u64::MAX]));
    let mut individual_rngs: Vec<ChaCha8Rng> = (0..data.len())
        .map(|i| ChaCha8Rng::seed_from_u64(stream_seed(chain_seed, &[i as u64])))
        .collect();

    let mut state = initial_state(model, data);
    check_initial(model, data, &state)?;
    let mut props = Proposals::new(model, config);

    let n = data.len();
    let l = model.n_latent();
    let k = model.n_random();
    let parameter_names = model.population_names();
    let mut states = Vec::with_capacity(config.stored_count());
    let mut population = Vec::with_capacity(config.stored_count());
    let mut beta_moments = vec![StreamingMoments::<T>::new(k); n];
    let mut alpha_moments = vec![StreamingMoments::<T>::new(l); n];

    let adapt = config.adapt_during_burn_in;
    let learn_from = config.burn_in / 5;
    let refresh_every = (config.burn_in / 10).max(50);

    for sweep in 0..config.n_sweeps {
        if sweep == config.burn_in {
            props.reset_counts();
        }
        let adapting = adapt && sweep < config.burn_in;

        if l > 0 {
            let mut accepted = 0u64;
            for i in 0..n {
                let (alpha, ok) = draw_alpha(&ctx, &state, i, &props.alpha, &mut individual_rngs[i]);
                state.alpha[i] = alpha;
                accepted += ok as u64;
            }
            props.alpha.record(accepted, n as u64);
            if adapting {
                props.alpha.adapt(sweep, accepted as f64 / n.max(1) as f64);
            }
            state.gamma = draw_gamma(&ctx, &state, &mut rng);
        }

        if model.n_indicators() > 0 {
            let up = draw_measurement(&ctx, &state, &props.zeta, &props.tau, &mut rng);
            for q in 0..model.n_indicators() {
                props.zeta[q].record(up.zeta_accepted[q] as u64, 1);
                props.tau[q].record(up.tau_accepted[q] as u64, 1);
                if adapting {
                    props.zeta[q].adapt(sweep, up.zeta_accepted[q] as u8 as f64);
                    props.tau[q].adapt(sweep, up.tau_accepted[q] as u8 as f64);
                }
            }
            state.zeta = up.zeta;
            state.tau = up.tau;
            for lv in 0..l {
                let first = model.latent_indicators[lv][0];
                if priors.reflected[lv] && state.zeta[first] < T::zero() {
                    state.reflect_latent(model, lv);
                }
            }
        }

        let up = draw_theta(&ctx, &state, &props.fixed, &props.beta, &mut rng, &mut individual_rngs);
        if let Some(ok) = up.fixed_accepted {
            props.fixed.record(ok as u64, 1);
            if adapting {
                props.fixed.adapt(sweep, ok as u8 as f64);
            }
        }
        if k > 0 {
            let accepted = up.beta_accepted.iter().filter(|&&a| a).count();
            props.beta.record(accepted as u64, n as u64);
            if adapting {
                props.beta.adapt(sweep, accepted as f64 / n.max(1) as f64);
            }
        }
        state.fixed = up.fixed;
        state.beta = up.beta;
        state.mu = up.mu;
        state.omega = up.omega;

        if k > 0 && ctx.use_likelihood {
            let moves = draw_population_moves(
                &ctx,
                &state.fixed,
                &state.alpha,
                std::mem::take(&mut state.beta),
                std::mem::take(&mut state.mu),
                state.omega.clone(),
                &props.shift,
                &props.scale,
                &mut rng,
            );
            for (p, ok) in [(&mut props.shift, moves.shift_accepted), (&mut props.scale, moves.scale_accepted)] {
                p.record(ok as u64, 1);
                if adapting {
                    p.adapt(sweep, ok as u8 as f64);
                }
            }
            state.beta = moves.beta;
            state.mu = moves.mu;
            state.omega = moves.omega;
        }

        if adapting && sweep >= learn_from {
            if model.n_fixed() > 1 {
                props.fixed.learn(&state.fixed);
            }
            for (q, t) in state.tau.iter().enumerate() {
                if t.len() > 1 {
                    props.tau[q].learn(&tau_to_unconstrained(t));
                }
            }
            if (sweep + 1 - learn_from) % refresh_every == 0 {
                props.fixed.refresh_shape();
                props.tau.iter_mut().for_each(Proposal::refresh_shape);
            }
        }

        if sweep >= config.burn_in {
            for i in 0..n {
                beta_moments[i].push(&state.beta[i]);
                alpha_moments[i].push(&state.alpha[i]);
            }
            if (sweep - config.burn_in + 1) % config.thin == 0 {
                for t in &state.tau {
                    check_thresholds(t).map_err(|e| Error::Numeric(format!("sweep {sweep}: {e}")))?;
                }
                if k > 0 && !state.omega.is_positive_definite() {
                    return Err(Error::Numeric(format!("sweep {sweep}: omega lost positive definiteness")));
                }
                let mut stored = state.clone();
                if !config.store_individual_draws {
                    stored.beta = Vec::new();
                    stored.alpha = Vec::new();
                }
                population.push(stored.population_vector(model));
                states.push(stored);
            }
        }
    }

    Ok(PosteriorDraws {
        chain,
        config: config.clone(),
        parameter_names,
        states,
        population,
        acceptance: props.report(model),
        individual_ids: data.individuals.iter().map(|i| i.id.clone()).collect(),
        beta_mean: beta_moments.iter().map(|m| m.mean().to_vec()).collect(),
        beta_sd: beta_moments.iter().map(StreamingMoments::sd).collect(),
        alpha_mean: alpha_moments.iter().map(|m| m.mean().to_vec()).collect(),
        alpha_sd: alpha_moments.iter().map(StreamingMoments::sd).collect(),
    })
}
