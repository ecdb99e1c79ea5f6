//! Utility, logit and ordered-logit kernels.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::data::Individual;
use crate::model::spec::{CompiledModel, Slot, Source};
use crate::model::state::check_thresholds;
use crate::real::Real;

/// `ln(1 + eˣ)` without overflow.
#[inline]
pub fn softplus<T: Real>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

/// `ln σ(x)` for the standard logistic CDF σ.
#[inline]
pub fn log_sigmoid<T: Real>(x: T) -> T {
    -softplus(-x)
}

#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn log_sum_exp<T: Real>(values: &[T]) -> T {
    let m = values.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    m + values.iter().map(|&v| (v - m).exp()).sum::<T>().ln()
}

/// Latent-variable means `Γ z`.
pub fn structural_mean<T: Real>(gamma: &Matrix<T>, z: &[T]) -> Result<Vec<T>> {
    if gamma.cols() != z.len() {
        return Err(Error::Config(format!(
            "gamma has {} columns but z has {} entries",
            gamma.cols(),
            z.len()
        )));
    }
    Ok(gamma.mul_vec(z))
}

/// Systematic utilities of the individual's available alternatives, in the
/// order of `individual.available`.
pub fn systematic_utility<T: Real>(
    model: &CompiledModel,
    individual: &Individual<T>,
    fixed: &[T],
    beta: &[T],
    alpha: &[T],
) -> Result<Vec<T>> {
    if fixed.len() != model.n_fixed() || beta.len() != model.n_random() || alpha.len() != model.n_latent() {
        return Err(Error::Config("coefficient vectors do not match the model layout".into()));
    }
    for &a in &individual.available {
        for term in &model.terms[a] {
            if let Source::Attribute(k) = term.source {
                let v = individual.attributes.get(a).and_then(|row| row.get(k));
                if !v.is_some_and(|v| v.is_finite()) {
                    return Err(Error::Data(format!(
                        "attribute '{}' missing for alternative '{}' of individual {}",
                        model.attribute_names[k], model.alternative_ids[a], individual.id
                    )));
                }
            }
        }
    }
    let mut out = Vec::with_capacity(individual.available.len());
    utilities_into(model, individual, fixed, beta, alpha, &mut out);
    Ok(out)
}

/// Unchecked variant of [`systematic_utility`] for validated data.
#[inline]
pub fn utilities_into<T: Real>(
    model: &CompiledModel,
    individual: &Individual<T>,
    fixed: &[T],
    beta: &[T],
    alpha: &[T],
    out: &mut Vec<T>,
) {
    out.clear();
    for &a in &individual.available {
        let mut u = T::zero();
        for term in &model.terms[a] {
            let coef = match term.slot {
                Slot::Fixed(f) => fixed[f],
                Slot::Random(k) => beta[k],
            };
            let x = match term.source {
                Source::Constant => T::one(),
                Source::Attribute(k) => individual.attributes[a][k],
                Source::Latent(l) => alpha[l],
            };
            u = u + coef * x;
        }
        out.push(u);
    }
}

/// Logit choice probabilities over the supplied utilities.
pub fn mnl_probabilities<T: Real>(utilities: &[T]) -> Result<Vec<T>> {
    if utilities.is_empty() {
        return Err(Error::Numeric("no utilities supplied".into()));
    }
    if utilities.iter().any(|u| !u.is_finite()) {
        return Err(Error::Numeric(format!("non-finite utility in {utilities:?}")));
    }
    let m = utilities.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = utilities.iter().map(|&u| (u - m).exp()).collect();
    let total: T = exps.iter().copied().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Log probability of alternative `position` under the logit kernel.
#[inline]
pub fn mnl_log_probability<T: Real>(utilities: &[T], position: usize) -> T {
    utilities[position] - log_sum_exp(utilities)
}

/// Index of the highest utility; ties go to the lowest index.
pub fn predict_choice<T: Real>(utilities: &[T]) -> usize {
    let mut best = 0;
    for (i, &u) in utilities.iter().enumerate().skip(1) {
        if u > utilities[best] {
            best = i;
        }
    }
    best
}

/// Category probabilities of the ordered logit with location `zeta * alpha`.
pub fn ordered_logit_pmf<T: Real>(zeta: T, alpha: T, tau: &[T]) -> Result<Vec<T>> {
    check_thresholds(tau)?;
    let x = zeta * alpha;
    if !x.is_finite() {
        return Err(Error::Numeric("non-finite ordered-logit location".into()));
    }
    let mut prev = T::zero();
    let mut out = Vec::with_capacity(tau.len() + 1);
    for &t in tau {
        let cdf = sigmoid(t - x);
        out.push(cdf - prev);
        prev = cdf;
    }
    out.push(T::one() - prev);
    Ok(out)
}

/// Log probability of zero-based `category` given location `x = ζα`.
/// Thresholds are assumed valid.
#[inline]
pub fn ordered_logit_log_probability<T: Real>(category: usize, x: T, tau: &[T]) -> T {
    let k = tau.len();
    if k == 0 {
        return T::zero();
    }
    if category == 0 {
        log_sigmoid(tau[0] - x)
    } else if category == k {
        log_sigmoid(x - tau[k - 1])
    } else {
        let lo = tau[category - 1] - x;
        let hi = tau[category] - x;
        log_sigmoid(hi) + log_sigmoid(-lo) + (-(lo - hi).exp()).ln_1p()
    }
}
