mod common;

use common::{ks_p_value, mean, model, variance};
use hdcm_core::model::{ordered_logit_pmf, ChoiceDataset, Individual, ParameterState};
use hdcm_core::sampler::blocks::{sample_inverse_gamma, tau_to_unconstrained};
use hdcm_core::sampler::{
    draw_alpha, draw_gamma, draw_measurement, draw_theta, run_chain, Context, Priors, Proposal, ResolvedPriors,
    SamplerConfig,
};
use hdcm_core::io::{generate_synthetic, TruthSpec};
use hdcm_core::CompiledModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn one_lv_model(categories: usize) -> CompiledModel {
    model(&format!(
        r#"
        asc_reference = "b"
        cost_attribute = "cost"
        alternatives = [{{ id = "a" }}, {{ id = "b" }}]

        [[latent_variables]]
        name = "att"
        structural_covariates = ["z"]
        indicators = [{{ id = "q", categories = {categories} }}]

        [[utility_terms]]
        variable = "cost"
        applies_to = ["a", "b"]
        kind = "random"

        [[utility_terms]]
        variable = "att"
        applies_to = ["a"]
        "#
    ))
}

fn person(id: usize, z: f64, available: Vec<usize>, response: Option<u8>) -> Individual<f64> {
    Individual {
        id: (id + 1).to_string(),
        z: vec![z],
        chosen: available[0],
        available,
        responses: vec![response],
        attributes: vec![vec![1.0], vec![0.5]],
    }
}

fn dataset(model: &CompiledModel, individuals: Vec<Individual<f64>>) -> ChoiceDataset<f64> {
    let mut d = ChoiceDataset::empty(model);
    d.individuals = individuals;
    d
}

fn resolved(model: &CompiledModel) -> ResolvedPriors<f64> {
    ResolvedPriors::resolve(model, &Priors::default()).unwrap()
}

#[test]
fn alpha_without_loadings_samples_structural_prior() {
    let m = one_lv_model(2);
    let data = dataset(&m, vec![person(0, 1.0, vec![0, 1], Some(1))]);
    let priors = resolved(&m);
    let ctx = Context { model: &m, data: &data, priors: &priors, use_likelihood: true };
    let mut state = ParameterState::zeros(&m);
    state.gamma[(0, 0)] = 1.0;
    state.beta = vec![vec![0.0]];
    state.alpha = vec![vec![0.0]];
    let proposal = Proposal::new(2.4, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut draws = Vec::with_capacity(50_000);
    for t in 0..51_000 {
        let (a, _) = draw_alpha(&ctx, &state, 0, &proposal, &mut rng);
        state.alpha[0] = a;
        if t >= 1_000 {
            draws.push(state.alpha[0][0]);
        }
    }
    assert!((mean(&draws) - 1.0).abs() < 0.02, "mean {}", mean(&draws));
    assert!((variance(&draws) - 1.0).abs() < 0.02, "variance {}", variance(&draws));
}

#[test]
fn alpha_with_flat_likelihood_samples_structural_prior() {
    let m = one_lv_model(2);
    // single available alternative and no answered indicator
    let data = dataset(&m, vec![person(0, -0.5, vec![1], None)]);
    let priors = resolved(&m);
    let ctx = Context { model: &m, data: &data, priors: &priors, use_likelihood: true };
    let mut state = ParameterState::zeros(&m);
    state.gamma[(0, 0)] = 1.0;
    state.zeta = vec![2.0];
    state.fixed = vec![0.0, 3.0];
    state.beta = vec![vec![0.0]];
    state.alpha = vec![vec![0.0]];
    let proposal = Proposal::new(2.4, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut draws = Vec::new();
    for t in 0..51_000 {
        state.alpha[0] = draw_alpha(&ctx, &state, 0, &proposal, &mut rng).0;
        if t >= 1_000 {
            draws.push(state.alpha[0][0]);
        }
    }
    assert!((mean(&draws) + 0.5).abs() < 0.02, "mean {}", mean(&draws));
    assert!((variance(&draws) - 1.0).abs() < 0.02, "variance {}", variance(&draws));
}

#[test]
fn zero_scale_alpha_chain_is_constant() {
    let m = one_lv_model(2);
    let data = dataset(&m, vec![person(0, 1.0, vec![0, 1], Some(0))]);
    let priors = resolved(&m);
    let ctx = Context { model: &m, data: &data, priors: &priors, use_likelihood: true };
    let mut state = ParameterState::zeros(&m);
    state.beta = vec![vec![0.0]];
    state.alpha = vec![vec![0.3]];
    let proposal = Proposal::new(0.0, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let (a, accepted) = draw_alpha(&ctx, &state, 0, &proposal, &mut rng);
        assert!(accepted);
        assert_eq!(a, vec![0.3]);
    }
}

#[test]
fn gamma_scalar_conjugate_update() {
    let m = one_lv_model(2);
    let data = dataset(&m, vec![person(0, 1.0, vec![0, 1], Some(0))]);
    let priors = resolved(&m);
    let ctx = Context { model: &m, data: &data, priors: &priors, use_likelihood: true };
    let mut state = ParameterState::zeros(&m);
    state.beta = vec![vec![0.0]];
    state.alpha = vec![vec![2.0]];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws: Vec<f64> = (0..200_000).map(|_| draw_gamma(&ctx, &state, &mut rng)[(0, 0)]).collect();
    assert!((mean(&draws) - 2.0 / 1.01).abs() < 0.01, "mean {}", mean(&draws));
    assert!((variance(&draws) / (1.0 / 1.01) - 1.0).abs() < 0.02, "variance {}", variance(&draws));
}

#[test]
fn gamma_without_individuals_samples_prior() {
    let m = one_lv_model(2);
    let data = dataset(&m, Vec::new());
    let priors = resolved(&m);
    let ctx = Context { model: &m, data: &data, priors: &priors, use_likelihood: true };
    let state = ParameterState::zeros(&m);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let draws: Vec<f64> = (0..100_000).map(|_| draw_gamma(&ctx, &state, &mut rng)[(0, 0)]).collect();
    assert!(mean(&draws).abs() < 0.15, "mean {}", mean(&draws));
    assert!((variance(&draws) / 100.0 - 1.0).abs() < 0.02, "variance {}", variance(&draws));
}

#[test]
fn gamma_mean_zero_when_z_alpha_cancels() {
    let m = one_lv_model(2);
    let data = dataset(&m, vec![person(0, 1.0, vec![0, 1], Some(0)), person(1, 1.0, vec![0, 1], Some(0))]);
    let priors = resolved(&m);
    let ctx = Context { model: &m, data: &data, priors: &priors, use_likelihood: true };
    let mut state = ParameterState::zeros(&m);
    state.beta = vec![vec![0.0]; 2];
    state.alpha = vec![vec![1.5], vec![-1.5]];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws: Vec<f64> = (0..100_000).map(|_| draw_gamma(&ctx, &state, &mut rng)[(0, 0)]).collect();
    assert!(mean(&draws).abs() < 0.01, "mean {}", mean(&draws));
}

#[test]
fn measurement_recovery_with_known_latents() {
    let m = one_lv_model(4);
    let (zeta, tau) = (1.5, [-1.0, 0.0, 1.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut alphas = Vec::new();
    let individuals = (0..5_000)
        .map(|i| {
            let a: f64 = Normal::new(0.0, 1.0).unwrap().sample(&mut rng);
            let pmf = ordered_logit_pmf(zeta, a, &tau).unwrap();
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let c = pmf.iter().position(|p| {
                acc += p;
                u < acc
            });
            alphas.push(vec![a]);
            person(i, 0.0, vec![0, 1], Some(c.unwrap_or(3) as u8))
        })
        .collect();
    let data = dataset(&m, individuals);
    let priors = resolved(&m);
    let ctx = Context { model: &m, data: &data, priors: &priors, use_likelihood: true };
    let mut state = ParameterState::zeros(&m);
    state.beta = vec![vec![0.0]; data.len()];
    state.alpha = alphas;
    let mut zp = vec![Proposal::new(0.1, 1)];
    let mut tp = vec![Proposal::new(0.05, 3)];
    let (mut zs, mut ts) = (Vec::new(), Vec::new());
    for sweep in 0..20_000 {
        let up = draw_measurement(&ctx, &state, &zp, &tp, &mut rng);
        for t in &up.tau {
            assert!(t.windows(2).all(|w| w[0] < w[1]));
        }
        if sweep < 5_000 {
            zp[0].adapt(sweep, up.zeta_accepted[0] as u8 as f64);
            tp[0].adapt(sweep, up.tau_accepted[0] as u8 as f64);
        } else {
            zs.push(up.zeta[0]);
            ts.push(up.tau[0].clone());
        }
        state.zeta = up.zeta;
        state.tau = up.tau;
    }
    assert!((mean(&zs) - zeta).abs() < 0.1, "zeta {}", mean(&zs));
    for k in 0..3 {
        let m: Vec<f64> = ts.iter().map(|t| t[k]).collect();
        assert!((mean(&m) - tau[k]).abs() < 0.1, "tau {k}: {}", mean(&m));
    }
}

#[test]
fn loading_with_zero_latents_follows_prior() {
    let m = model(
        r#"
        asc_reference = "b"
        cost_attribute = "cost"
        alternatives = [{ id = "a" }, { id = "b" }]
        [[latent_variables]]
        name = "att"
        structural_covariates = ["z"]
        indicators = [{ id = "q0", categories = 3 }, { id = "q", categories = 3 }]
        [[utility_terms]]
        variable = "cost"
        applies_to = ["a", "b"]
        "#,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let individuals: Vec<Individual<f64>> = (0..200)
        .map(|i| Individual {
            id: (i + 1).to_string(),
            z: vec![0.0],
            available: vec![0, 1],
            chosen: 0,
            responses: vec![Some((i % 3) as u8), Some((i % 3) as u8)],
            attributes: vec![vec![1.0], vec![0.5]],
        })
        .collect();
    let data = dataset(&m, individuals);
    let priors = resolved(&m);
    let ctx = Context { model: &m, data: &data, priors: &priors, use_likelihood: true };
    let mut state = ParameterState::zeros(&m);
    state.alpha = vec![vec![0.0]; data.len()];
    let zp = vec![Proposal::new(0.1, 1), Proposal::new(25.0, 1)];
    let tp = vec![Proposal::new(0.1, 2), Proposal::new(0.1, 2)];
    let mut draws = Vec::new();
    for sweep in 0..10_000 * 20 {
        let up = draw_measurement(&ctx, &state, &zp, &tp, &mut rng);
        state.zeta = up.zeta;
        state.tau = up.tau;
        if sweep % 20 == 0 {
            draws.push(state.zeta[1]);
        }
    }
    let normal = Normal::new(0.0, 10.0).unwrap();
    let reference: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
    let p = ks_p_value(&draws, &reference);
    assert!(p > 0.01, "KS p-value {p}");
}

#[test]
fn beta_with_flat_likelihood_samples_population() {
    let m = one_lv_model(2);
    let data = dataset(&m, vec![person(0, 0.0, vec![1], None)]);
    let priors = resolved(&m);
    let ctx = Context { model: &m, data: &data, priors: &priors, use_likelihood: true };
    let mut state = ParameterState::zeros(&m);
    state.mu = vec![-1.0];
    state.omega[(0, 0)] = 0.25;
    state.beta = vec![vec![-1.0]];
    state.alpha = vec![vec![0.0]];
    let fixed = Proposal::new(0.0, 1);
    let beta = Proposal::new(1.2, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut individual = vec![ChaCha8Rng::seed_from_u64(42)];
    let mut draws = Vec::new();
    for t in 0..101_000 {
        let up = draw_theta(&ctx, &state, &fixed, &beta, &mut rng, &mut individual);
        state.beta = up.beta;
        if t >= 1_000 {
            draws.push(state.beta[0][0]);
        }
    }
    assert!((mean(&draws) + 1.0).abs() < 0.02, "mean {}", mean(&draws));
    assert!((variance(&draws) / 0.25 - 1.0).abs() < 0.02, "variance {}", variance(&draws));
}

fn mnl_model() -> CompiledModel {
    model(
        r#"
        asc_reference = "c"
        cost_attribute = "cost"
        alternatives = [{ id = "a" }, { id = "b" }, { id = "c" }]
        [[utility_terms]]
        variable = "cost"
        applies_to = ["a", "b", "c"]
        kind = "random"
        [[utility_terms]]
        variable = "quality"
        applies_to = ["a", "b", "c"]
        kind = "random"
        "#,
    )
}

fn mnl_truth() -> TruthSpec {
    toml::from_str(
        r#"
        [attributes]
        cost = { kind = "uniform", low = 0.0, high = 3.0 }
        quality = { kind = "normal", mean = 0.0, sd = 1.5 }
        [parameters]
        "fixed.asc_a" = 0.3
        "fixed.asc_b" = -0.2
        "mu.cost" = -1.0
        "mu.quality" = 0.5
        "omega.cost.cost" = 0.25
        "omega.quality.quality" = 0.25
        "#,
    )
    .unwrap()
}

#[test]
fn random_coefficient_means_recovered() {
    let m = mnl_model();
    let sim = generate_synthetic::<f64>(&m, &mnl_truth(), 2_000, 8).unwrap();
    let config = SamplerConfig { n_sweeps: 4_000, burn_in: 2_000, seed: 3, ..SamplerConfig::default() };
    let draws = run_chain(&m, &sim.data, &config).unwrap();
    for (name, truth) in [("mu.cost", -1.0), ("mu.quality", 0.5)] {
        let est = mean(&draws.series(name).unwrap());
        assert!((est - truth).abs() < 0.1, "{name}: {est}");
    }
}

#[test]
fn chain_bookkeeping_and_determinism() {
    let m = mnl_model();
    let sim = generate_synthetic::<f64>(&m, &mnl_truth(), 100, 2).unwrap();
    let config = SamplerConfig { n_sweeps: 1_000, burn_in: 500, thin: 5, seed: 77, ..SamplerConfig::default() };
    let a = run_chain(&m, &sim.data, &config).unwrap();
    let b = run_chain(&m, &sim.data, &config).unwrap();
    assert_eq!(a.len(), 100);
    assert_eq!(a.population.len(), 100);
    assert_eq!(a, b);
    let c = run_chain(&m, &sim.data, &SamplerConfig { seed: 78, ..config }).unwrap();
    assert_ne!(a.population, c.population);
}

#[test]
fn stored_states_keep_constraints() {
    let m = common::recovery_model();
    let sim = generate_synthetic::<f64>(&m, &common::recovery_truth(), 150, 4).unwrap();
    let config = SamplerConfig {
        n_sweeps: 600,
        burn_in: 300,
        seed: 9,
        store_individual_draws: true,
        priors: Priors { omega_df_offset: 2.0, ..Priors::default() },
        ..SamplerConfig::default()
    };
    let draws = run_chain(&m, &sim.data, &config).unwrap();
    for s in &draws.states {
        for t in &s.tau {
            assert!(t.windows(2).all(|w| w[0] < w[1]));
        }
        assert!(s.omega.cholesky().is_ok());
        assert_eq!(s.beta.len(), 150);
        assert_eq!(s.alpha.len(), 150);
    }
}

#[test]
fn full_covariance_states_positive_definite() {
    let mut spec = mnl_model().spec().clone();
    spec.covariance = hdcm_core::model::CovarianceMode::Full;
    let m = spec.compile().unwrap();
    let mut truth = mnl_truth();
    truth.parameters.insert("omega.cost.quality".into(), 0.1);
    let sim = generate_synthetic::<f64>(&m, &truth, 300, 5).unwrap();
    let config = SamplerConfig { n_sweeps: 800, burn_in: 400, seed: 4, ..SamplerConfig::default() };
    let draws = run_chain(&m, &sim.data, &config).unwrap();
    for s in &draws.states {
        assert!(s.omega.cholesky().is_ok());
        assert_eq!(s.omega[(0, 1)], s.omega[(1, 0)]);
    }
}

fn prior_only_draws() -> (CompiledModel, Vec<hdcm_core::ParameterState>) {
    let m = model(
        r#"
        asc_reference = "b"
        cost_attribute = "cost"
        alternatives = [{ id = "a" }, { id = "b" }]
        [[latent_variables]]
        name = "att"
        structural_covariates = ["z"]
        indicators = [{ id = "q1", categories = 3 }, { id = "q2", categories = 3 }]
        [[utility_terms]]
        variable = "cost"
        applies_to = ["a", "b"]
        kind = "random"
        [[utility_terms]]
        variable = "att"
        applies_to = ["a"]
        "#,
    );
    let truth: TruthSpec = toml::from_str(
        r#"
        [covariates]
        z = { kind = "normal", mean = 0.0, sd = 1.0 }
        [attributes]
        cost = { kind = "uniform", low = 0.0, high = 2.0 }
        [parameters]
        "gamma.att.z" = 0.5
        "zeta.q1" = 1.0
        "zeta.q2" = 1.0
        "tau.q1.1" = -1.0
        "tau.q1.2" = 1.0
        "tau.q2.1" = -1.0
        "tau.q2.2" = 1.0
        "fixed.asc_a" = 0.0
        "fixed.att" = 0.5
        "mu.cost" = -1.0
        "omega.cost.cost" = 0.5
        "#,
    )
    .unwrap();
    let sim = generate_synthetic::<f64>(&m, &truth, 20, 1).unwrap();
    let config = SamplerConfig {
        n_sweeps: 255_000,
        burn_in: 5_000,
        thin: 25,
        seed: 123,
        prior_only: true,
        ..SamplerConfig::default()
    };
    let draws = run_chain(&m, &sim.data, &config).unwrap();
    (m, draws.states)
}

#[test]
fn prior_only_blocks_match_their_priors() {
    let (_, states) = prior_only_draws();
    assert_eq!(states.len(), 10_000);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let normal = Normal::new(0.0, 10.0).unwrap();
    let reference: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
    let half: Vec<f64> = reference.iter().map(|v| v.abs()).collect();
    let inv_gamma: Vec<f64> = (0..10_000).map(|_| sample_inverse_gamma(2.0, 1.0, &mut rng)).collect();

    let series = |f: &dyn Fn(&hdcm_core::ParameterState) -> f64| states.iter().map(f).collect::<Vec<f64>>();
    let checks: Vec<(&str, Vec<f64>, &Vec<f64>)> = vec![
        ("gamma", series(&|s| s.gamma[(0, 0)]), &reference),
        ("zeta (anchored)", series(&|s| s.zeta[0]), &half),
        ("zeta", series(&|s| s.zeta[1]), &reference),
        ("tau first threshold", series(&|s| s.tau[1][0]), &reference),
        ("tau log-increment", series(&|s| tau_to_unconstrained(&s.tau[1])[1]), &reference),
        ("fixed asc", series(&|s| s.fixed[0]), &reference),
        ("fixed loading", series(&|s| s.fixed[1]), &reference),
        ("mu", series(&|s| s.mu[0]), &reference),
        ("omega", series(&|s| s.omega[(0, 0)]), &inv_gamma),
    ];
    for (name, draws, reference) in checks {
        let p = ks_p_value(&draws, reference);
        assert!(p > 0.01, "{name}: KS p-value {p}");
    }
}

#[test]
fn population_moves_keep_priors_under_flat_likelihood() {
    let m = model(
        r#"
        asc_reference = "b"
        cost_attribute = "cost"
        alternatives = [{ id = "a" }, { id = "b" }]
        [[utility_terms]]
        variable = "cost"
        applies_to = ["a", "b"]
        kind = "random"
        "#,
    );
    let truth: TruthSpec = toml::from_str(
        r#"
        [attributes]
        cost = { kind = "constant", value = 1.5 }
        [parameters]
        "fixed.asc_a" = 0.3
        "mu.cost" = -1.0
        "omega.cost.cost" = 0.5
        "#,
    )
    .unwrap();
    let sim = generate_synthetic::<f64>(&m, &truth, 3, 6).unwrap();
    let config = SamplerConfig { n_sweeps: 255_000, burn_in: 5_000, thin: 25, seed: 8, ..SamplerConfig::default() };
    let draws = run_chain(&m, &sim.data, &config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let normal = Normal::new(0.0, 10.0).unwrap();
    let reference: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
    let inv_gamma: Vec<f64> = (0..10_000).map(|_| sample_inverse_gamma(2.0, 1.0, &mut rng)).collect();
    let mu: Vec<f64> = draws.states.iter().map(|s| s.mu[0]).collect();
    let omega: Vec<f64> = draws.states.iter().map(|s| s.omega[(0, 0)]).collect();
    let p_mu = ks_p_value(&mu, &reference);
    let p_omega = ks_p_value(&omega, &inv_gamma);
    assert!(p_mu > 0.01, "mu KS p-value {p_mu}");
    assert!(p_omega > 0.01, "omega KS p-value {p_omega}");
    let rates: Vec<f64> = draws.acceptance.iter().filter(|a| a.block.contains('_')).map(|a| a.rate).collect();
    assert_eq!(rates.len(), 2);
}

#[test]
fn population_moves_keep_inverse_wishart_prior() {
    let mut spec = mnl_model().spec().clone();
    spec.covariance = hdcm_core::model::CovarianceMode::Full;
    let m = spec.compile().unwrap();
    let mut truth = mnl_truth();
    truth.attributes.insert("cost".into(), toml::from_str("kind = \"constant\"\nvalue = 1.0").unwrap());
    truth.attributes.insert("quality".into(), toml::from_str("kind = \"constant\"\nvalue = -0.5").unwrap());
    truth.parameters.insert("omega.cost.quality".into(), 0.0);
    let sim = generate_synthetic::<f64>(&m, &truth, 3, 6).unwrap();
    let config = SamplerConfig { n_sweeps: 255_000, burn_in: 5_000, thin: 25, seed: 8, ..SamplerConfig::default() };
    let draws = run_chain(&m, &sim.data, &config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // diagonal entry of IW(4, I₂) is IG(1.5, 0.5)
    let reference: Vec<f64> = (0..10_000).map(|_| sample_inverse_gamma(1.5, 0.5, &mut rng)).collect();
    for j in 0..2 {
        let omega: Vec<f64> = draws.states.iter().map(|s| s.omega[(j, j)]).collect();
        let p = ks_p_value(&omega, &reference);
        assert!(p > 0.01, "omega[{j}] KS p-value {p}");
    }
}
