#![allow(dead_code)]

use hdcm_core::io::TruthSpec;
use hdcm_core::{CompiledModel, ModelSpec};

pub fn model(toml_text: &str) -> CompiledModel {
    let spec: ModelSpec = toml::from_str(toml_text).unwrap();
    spec.compile().unwrap()
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Asymptotic two-sample Kolmogorov–Smirnov p-value.
pub fn ks_p_value(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    let lambda = (ne + 0.12 + 0.11 / ne) * d;
    let p: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    p.clamp(0.0, 1.0)
}

/// Four alternatives, two latent variables with three five-level indicators
/// each, three random attribute coefficients and two structural covariates.
pub fn recovery_model() -> CompiledModel {
    let spec: ModelSpec = toml::from_str(
        r#"
        asc_reference = "walk"
        cost_attribute = "cost"

        alternatives = [{ id = "car" }, { id = "moto" }, { id = "bus" }, { id = "walk" }]

        [[latent_variables]]
        name = "indiv"
        structural_covariates = ["female", "age"]
        indicators = [
            { id = "i1", categories = 5 },
            { id = "i2", categories = 5 },
            { id = "i3", categories = 5 },
        ]

        [[latent_variables]]
        name = "green"
        structural_covariates = ["female", "age"]
        indicators = [
            { id = "g1", categories = 5 },
            { id = "g2", categories = 5 },
            { id = "g3", categories = 5 },
        ]

        [[utility_terms]]
        variable = "cost"
        applies_to = ["car", "moto", "bus", "walk"]
        kind = "random"

        [[utility_terms]]
        variable = "time"
        applies_to = ["car", "moto", "bus", "walk"]
        kind = "random"

        [[utility_terms]]
        variable = "comfort"
        applies_to = ["car", "moto", "bus", "walk"]
        kind = "random"

        [[utility_terms]]
        variable = "indiv"
        applies_to = ["car", "moto"]

        [[utility_terms]]
        variable = "green"
        applies_to = ["bus", "walk"]
        "#,
    )
    .unwrap();
    spec.compile().unwrap()
}

pub fn recovery_truth() -> TruthSpec {
    toml::from_str(
        r#"
        [covariates]
        female = { kind = "bernoulli", p = 0.5 }
        age = { kind = "normal", mean = 0.0, sd = 1.0 }

        [attributes]
        cost = { kind = "uniform", low = 0.0, high = 3.0 }
        time = { kind = "uniform", low = 0.0, high = 3.0 }
        comfort = { kind = "uniform", low = -1.5, high = 1.5 }

        [parameters]
        "gamma.indiv.female" = 0.6
        "gamma.indiv.age" = -0.5
        "gamma.green.female" = -0.4
        "gamma.green.age" = 0.7
        "zeta.i1" = 1.5
        "zeta.i2" = 1.0
        "zeta.i3" = 1.2
        "zeta.g1" = 1.4
        "zeta.g2" = 0.9
        "zeta.g3" = 1.1
        "tau.i1.1" = -2.0
        "tau.i1.2" = -0.8
        "tau.i1.3" = 0.6
        "tau.i1.4" = 2.0
        "tau.i2.1" = -1.8
        "tau.i2.2" = -0.5
        "tau.i2.3" = 0.5
        "tau.i2.4" = 1.8
        "tau.i3.1" = -2.2
        "tau.i3.2" = -1.0
        "tau.i3.3" = 0.4
        "tau.i3.4" = 1.6
        "tau.g1.1" = -1.6
        "tau.g1.2" = -0.6
        "tau.g1.3" = 0.7
        "tau.g1.4" = 2.1
        "tau.g2.1" = -2.0
        "tau.g2.2" = -0.4
        "tau.g2.3" = 0.8
        "tau.g2.4" = 1.9
        "tau.g3.1" = -1.9
        "tau.g3.2" = -0.7
        "tau.g3.3" = 0.3
        "tau.g3.4" = 1.7
        "fixed.asc_car" = 0.5
        "fixed.asc_moto" = -0.3
        "fixed.asc_bus" = 0.2
        "fixed.indiv" = 0.8
        "fixed.green" = 0.6
        "mu.cost" = -1.0
        "mu.time" = -0.6
        "mu.comfort" = 0.8
        "omega.cost.cost" = 0.25
        "omega.time.time" = 0.16
        "omega.comfort.comfort" = 0.2
        "#,
    )
    .unwrap()
}

/// Off-street and on-street car parking plus bus. The shared random
/// `carness` constant makes the two car alternatives closer substitutes of
/// each other than of the bus.
pub fn parking_model() -> CompiledModel {
    let spec: ModelSpec = toml::from_str(
        r#"
        asc_reference = "bus"
        cost_attribute = "cost"

        alternatives = [{ id = "car_off" }, { id = "car_on" }, { id = "bus" }]

        [[utility_terms]]
        variable = "cost"
        applies_to = ["car_off", "car_on", "bus"]

        [[utility_terms]]
        variable = "search_time"
        applies_to = ["car_off", "car_on"]

        [[utility_terms]]
        variable = "carness"
        applies_to = ["car_off", "car_on"]
        kind = "random"
        "#,
    )
    .unwrap();
    spec.compile().unwrap()
}

/// Truth for `parking_model`: `carness` is a constant 1 on both car
/// alternatives, so its random coefficient acts as a shared car taste.
pub fn parking_truth() -> TruthSpec {
    toml::from_str(
        r#"
        [attributes]
        cost = { kind = "uniform", low = 0.0, high = 2.0 }
        search_time = { kind = "uniform", low = 0.0, high = 2.0 }
        carness = { kind = "constant", value = 1.0 }

        [parameters]
        "fixed.asc_car_off" = 0.3
        "fixed.asc_car_on" = 0.0
        "fixed.cost" = -0.8
        "fixed.search_time" = -1.2
        "mu.carness" = 0.5
        "omega.carness.carness" = 4.0
        "#,
    )
    .unwrap()
}

/// One latent variable with one three-level indicator, two alternatives and
/// ten individuals: small enough for brute-force quadrature.
pub fn oracle_instance() -> (CompiledModel, hdcm_core::ChoiceDataset, hdcm_core::ParameterState) {
    let m = model(
        r#"
        asc_reference = "b"
        cost_attribute = "cost"
        alternatives = [{ id = "a" }, { id = "b" }]

        [[latent_variables]]
        name = "att"
        structural_covariates = ["z"]
        indicators = [{ id = "q", categories = 3 }]

        [[utility_terms]]
        variable = "cost"
        applies_to = ["a", "b"]

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
        "gamma.att.z" = 0.8
        "zeta.q" = 1.3
        "tau.q.1" = -0.6
        "tau.q.2" = 0.9
        "fixed.asc_a" = 0.2
        "fixed.cost" = -0.9
        "fixed.att" = 1.1
        "#,
    )
    .unwrap();
    let sim = hdcm_core::io::generate_synthetic::<f64>(&m, &truth, 10, 17).unwrap();
    let state = truth.state(&m).unwrap();
    (m, sim.data, state)
}
