mod common;

use hdcm_core::linalg::solve_lower;
use hdcm_core::model::kernels::structural_mean;
use hdcm_core::model::likelihood::{choice_loglik_total, indicator_loglik};
use hdcm_core::model::{joint_loglik_mc, joint_loglik_quadrature, ordered_logit_pmf, QuadratureGrid};
use hdcm_core::Error;

const GRID: QuadratureGrid = QuadratureGrid { lo: -10.0, hi: 10.0, n_points: 10_001 };

#[test]
fn simulated_matches_quadrature() {
    let (m, data, state) = common::oracle_instance();
    let mc = joint_loglik_mc(&m, &data, &state, 100_000, 5).unwrap();
    let quad = joint_loglik_quadrature(&m, &data, &state, GRID).unwrap();
    assert!(((mc - quad) / quad).abs() <= 0.005, "mc {mc} quadrature {quad}");
}

#[test]
fn factorizes_without_loadings() {
    let (m, data, mut state) = common::oracle_instance();
    state.zeta[0] = 0.0;
    state.fixed[2] = 0.0;
    let tau = state.tau[0].clone();
    let pmf = ordered_logit_pmf(0.0, 0.0, &tau).unwrap();
    let indicators: f64 = data.individuals.iter().map(|ind| pmf[ind.responses[0].unwrap() as usize].ln()).sum();
    let mut choice_state = state.clone();
    choice_state.alpha = vec![vec![0.0]; data.len()];
    let closed = choice_loglik_total(&m, &data, &choice_state) + indicators;
    for (n_draws, seed) in [(1, 0), (7, 3), (1_000, 99)] {
        let mc = joint_loglik_mc(&m, &data, &state, n_draws, seed).unwrap();
        assert!((mc - closed).abs() < 1e-10, "{n_draws} draws: {mc} vs {closed}");
    }
    let quad = joint_loglik_quadrature(&m, &data, &state, GRID).unwrap();
    assert!((quad - closed).abs() < 1e-6, "{quad} vs {closed}");
}

#[test]
fn without_indicators_reduces_to_choice_model() {
    let m = common::model(
        r#"
        asc_reference = "b"
        cost_attribute = "cost"
        alternatives = [{ id = "a" }, { id = "b" }]
        [[utility_terms]]
        variable = "cost"
        applies_to = ["a", "b"]
        "#,
    );
    let truth: hdcm_core::io::TruthSpec = toml::from_str(
        r#"
        [attributes]
        cost = { kind = "uniform", low = 0.0, high = 2.0 }
        [parameters]
        "fixed.asc_a" = 0.4
        "fixed.cost" = -1.2
        "#,
    )
    .unwrap();
    let sim = hdcm_core::io::generate_synthetic::<f64>(&m, &truth, 50, 2).unwrap();
    let state = truth.state::<f64>(&m).unwrap();
    let closed = choice_loglik_total(&m, &sim.data, &state);
    let mc = joint_loglik_mc(&m, &sim.data, &state, 10, 1).unwrap();
    assert!((mc - closed).abs() < 1e-10);
    let quad = joint_loglik_quadrature(&m, &sim.data, &state, GRID).unwrap();
    assert!((quad - closed).abs() < 1e-10);
}

#[test]
fn quadrature_insensitive_to_wider_grid() {
    let (m, data, state) = common::oracle_instance();
    let narrow = joint_loglik_quadrature(&m, &data, &state, QuadratureGrid { lo: -8.0, hi: 8.0, n_points: 8_001 }).unwrap();
    let wide = joint_loglik_quadrature(&m, &data, &state, QuadratureGrid { lo: -12.0, hi: 12.0, n_points: 12_001 }).unwrap();
    assert!((narrow - wide).abs() < 1e-8, "{narrow} vs {wide}");
}

#[test]
fn simulated_is_deterministic_in_seed() {
    let (m, data, state) = common::oracle_instance();
    let a = joint_loglik_mc(&m, &data, &state, 2_000, 42).unwrap();
    let b = joint_loglik_mc(&m, &data, &state, 2_000, 42).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
    let c = joint_loglik_mc(&m, &data, &state, 2_000, 43).unwrap();
    assert_ne!(a.to_bits(), c.to_bits());
}

#[test]
fn oracle_rejects_three_latents_and_coarse_grids() {
    let m = common::model(
        r#"
        asc_reference = "b"
        cost_attribute = "cost"
        alternatives = [{ id = "a" }, { id = "b" }]
        [[latent_variables]]
        name = "l1"
        indicators = [{ id = "q1", categories = 2 }]
        [[latent_variables]]
        name = "l2"
        indicators = [{ id = "q2", categories = 2 }]
        [[latent_variables]]
        name = "l3"
        indicators = [{ id = "q3", categories = 2 }]
        [[utility_terms]]
        variable = "cost"
        applies_to = ["a", "b"]
        "#,
    );
    let data = hdcm_core::ChoiceDataset::empty(&m);
    let state = hdcm_core::ParameterState::zeros(&m);
    assert!(matches!(joint_loglik_quadrature(&m, &data, &state, GRID), Err(Error::UnsupportedOracle(_))));

    let (m, data, state) = common::oracle_instance();
    let coarse = QuadratureGrid { lo: -5.0, hi: 5.0, n_points: 50 };
    assert!(matches!(joint_loglik_quadrature(&m, &data, &state, coarse), Err(Error::Config(_))));
    assert!(matches!(joint_loglik_mc(&m, &data, &state, 0, 1), Err(Error::Config(_))));
}

#[test]
fn two_latent_quadrature_matches_simulation() {
    let m = common::model(
        r#"
        asc_reference = "b"
        cost_attribute = "cost"
        alternatives = [{ id = "a" }, { id = "b" }]
        [[latent_variables]]
        name = "l1"
        structural_covariates = ["z"]
        indicators = [{ id = "q1", categories = 2 }]
        [[latent_variables]]
        name = "l2"
        indicators = [{ id = "q2", categories = 3 }]
        [[utility_terms]]
        variable = "cost"
        applies_to = ["a", "b"]
        [[utility_terms]]
        variable = "l1"
        applies_to = ["a"]
        [[utility_terms]]
        variable = "l2"
        applies_to = ["b"]
        "#,
    );
    let truth: hdcm_core::io::TruthSpec = toml::from_str(
        r#"
        [covariates]
        z = { kind = "normal", mean = 0.0, sd = 1.0 }
        [attributes]
        cost = { kind = "uniform", low = 0.0, high = 2.0 }
        [parameters]
        "gamma.l1.z" = 0.5
        "zeta.q1" = 1.0
        "zeta.q2" = 0.8
        "tau.q1.1" = 0.1
        "tau.q2.1" = -0.5
        "tau.q2.2" = 0.7
        "fixed.asc_a" = 0.1
        "fixed.cost" = -0.7
        "fixed.l1" = 0.9
        "fixed.l2" = -0.6
        "#,
    )
    .unwrap();
    let sim = hdcm_core::io::generate_synthetic::<f64>(&m, &truth, 5, 3).unwrap();
    let state = truth.state::<f64>(&m).unwrap();
    let quad =
        joint_loglik_quadrature(&m, &sim.data, &state, QuadratureGrid { lo: -8.0, hi: 8.0, n_points: 401 }).unwrap();
    let mc = joint_loglik_mc(&m, &sim.data, &state, 200_000, 8).unwrap();
    assert!(((mc - quad) / quad).abs() < 0.005, "mc {mc} quadrature {quad}");
}

#[test]
fn reflection_leaves_every_term_unchanged() {
    let mut spec = common::recovery_model().spec().clone();
    spec.lv_random = true;
    spec.covariance = hdcm_core::model::CovarianceMode::Full;
    let m = spec.compile().unwrap();
    let mut truth = common::recovery_truth();
    for name in ["indiv", "green"] {
        let v = truth.parameters.remove(&format!("fixed.{name}")).unwrap();
        truth.parameters.insert(format!("mu.{name}"), v);
    }
    for name in m.omega_names() {
        let (a, b) = name.trim_start_matches("omega.").split_once('.').unwrap();
        let v = if a == b { 0.3 } else { 0.05 };
        truth.parameters.entry(name).or_insert(v);
    }
    let sim = hdcm_core::io::generate_synthetic::<f64>(&m, &truth, 40, 9).unwrap();
    let state = sim.truth;
    let terms = |s: &hdcm_core::ParameterState| -> f64 {
        let chol = s.omega.cholesky().unwrap();
        let mut total = choice_loglik_total(&m, &sim.data, s);
        for (i, ind) in sim.data.individuals.iter().enumerate() {
            total += indicator_loglik(&m, ind, &s.zeta, &s.tau, &s.alpha[i]);
            let mean = structural_mean(&s.gamma, &ind.z).unwrap();
            total -= 0.5 * s.alpha[i].iter().zip(&mean).map(|(a, m)| (a - m).powi(2)).sum::<f64>();
            let d: Vec<f64> = s.beta[i].iter().zip(&s.mu).map(|(b, m)| b - m).collect();
            total -= 0.5 * solve_lower(&chol, &d).iter().map(|v| v * v).sum::<f64>();
        }
        total
    };
    for l in 0..2 {
        let mut reflected = state.clone();
        reflected.reflect_latent(&m, l);
        assert_ne!(reflected.zeta, state.zeta);
        assert!((terms(&reflected) - terms(&state)).abs() < 1e-9);
        assert!(reflected.omega.cholesky().is_ok());
        reflected.reflect_latent(&m, l);
        assert_eq!(reflected, state);
    }
}
