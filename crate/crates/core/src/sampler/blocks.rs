//! Full-conditional updates for the four parameter blocks.
//!
//! Each function reads the current [`ParameterState`] and returns the new
//! values for its block; the chain driver writes them back. Per-individual
//! updates take one RNG per individual so results do not depend on the
//! evaluation schedule.

use rand::Rng;

use crate::linalg::{solve_lower, solve_lower_transpose, Matrix, NotPositiveDefinite};
use crate::model::data::ChoiceDataset;
use crate::model::likelihood::{choice_loglik, indicator_loglik, indicator_term, std_normal_logpdf};
use crate::model::spec::{CompiledModel, CovarianceMode};
use crate::model::state::ParameterState;
use crate::real::Real;
use crate::sampler::config::{NormalPrior, ResolvedPriors};
use crate::sampler::mh::{mh_accept, Proposal};

/// Read-only inputs shared by every block update.
#[derive(Clone, Copy)]
pub struct Context<'a, T> {
    pub model: &'a CompiledModel,
    pub data: &'a ChoiceDataset<T>,
    pub priors: &'a ResolvedPriors<T>,
    /// When false every likelihood term is dropped and blocks sample their priors.
    pub use_likelihood: bool,
}

fn alpha_log_target<T: Real>(
    ctx: &Context<'_, T>,
    state: &ParameterState<T>,
    i: usize,
    mean: &[T],
    alpha: &[T],
    scratch: &mut Vec<T>,
) -> T {
    let mut t = std_normal_logpdf(alpha, mean);
    if ctx.use_likelihood {
        let ind = &ctx.data.individuals[i];
        t = t + choice_loglik(ctx.model, ind, &state.fixed, &state.beta[i], alpha, scratch)
            + indicator_loglik(ctx.model, ind, &state.zeta, &state.tau, alpha);
    }
    t
}

/// Random-walk MH update of individual `i`'s latent values against the
/// structural prior `N(Γz, I)`, the choice likelihood and the indicator
/// likelihoods.
pub fn draw_alpha<T: Real, R: Rng + ?Sized>(
    ctx: &Context<'_, T>,
    state: &ParameterState<T>,
    i: usize,
    proposal: &Proposal<T>,
    rng: &mut R,
) -> (Vec<T>, bool) {
    let mut scratch = Vec::new();
    let current = &state.alpha[i];
    let mean = state.gamma.mul_vec(&ctx.data.individuals[i].z);
    let cand = proposal.propose(current, None, rng);
    let lt_curr = alpha_log_target(ctx, state, i, &mean, current, &mut scratch);
    let lt_cand = alpha_log_target(ctx, state, i, &mean, &cand, &mut scratch);
    if mh_accept(lt_cand, lt_curr, T::zero(), rng) {
        (cand, true)
    } else {
        (current.clone(), false)
    }
}

/// Exact draw of `Γ` from its Gaussian full conditional. Each latent
/// variable is a Bayesian regression of `α` on its covariates with unit
/// error variance. Without likelihood terms `Γ` is drawn from its prior.
pub fn draw_gamma<T: Real, R: Rng + ?Sized>(ctx: &Context<'_, T>, state: &ParameterState<T>, rng: &mut R) -> Matrix<T> {
    let model = ctx.model;
    let mut gamma = Matrix::zeros(model.n_latent(), model.n_covariates());
    for (l, covs) in model.latent_covariates.iter().enumerate() {
        let p = covs.len();
        if p == 0 {
            continue;
        }
        let priors = &ctx.priors.gamma[l];
        let mut precision = Matrix::from_diagonal(&priors.iter().map(|pr| T::one() / pr.variance).collect::<Vec<_>>());
        let mut rhs: Vec<T> = priors.iter().map(|pr| pr.mean / pr.variance).collect();
        let mut z = vec![T::zero(); p];
        let individuals = if ctx.use_likelihood { ctx.data.individuals.as_slice() } else { &[] };
        for (i, ind) in individuals.iter().enumerate() {
            let Some(alpha) = state.alpha.get(i) else { break };
            for (zc, &c) in z.iter_mut().zip(covs) {
                *zc = ind.z[c];
            }
            precision.add_outer(&z, T::one());
            for (r, &zc) in rhs.iter_mut().zip(&z) {
                *r = *r + zc * alpha[l];
            }
        }
        let chol = precision.cholesky().expect("prior ridge keeps the precision positive definite");
        let mean = solve_lower_transpose(&chol, &solve_lower(&chol, &rhs));
        let eps: Vec<T> = (0..p).map(|_| T::sample_standard_normal(rng)).collect();
        let noise = solve_lower_transpose(&chol, &eps);
        for (k, &c) in covs.iter().enumerate() {
            gamma[(l, c)] = mean[k] + noise[k];
        }
    }
    gamma
}

/// Thresholds → (τ₁, ln(τ₂ − τ₁), …).
pub fn tau_to_unconstrained<T: Real>(tau: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(tau.len());
    if let Some(&first) = tau.first() {
        out.push(first);
        out.extend(tau.windows(2).map(|w| (w[1] - w[0]).ln()));
    }
    out
}

pub fn tau_from_unconstrained<T: Real>(u: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(u.len());
    if let Some(&first) = u.first() {
        out.push(first);
        let mut acc = first;
        for &d in &u[1..] {
            acc = acc + d.exp();
            out.push(acc);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct MeasurementUpdate<T> {
    pub zeta: Vec<T>,
    pub tau: Vec<Vec<T>>,
    pub zeta_accepted: Vec<bool>,
    pub tau_accepted: Vec<bool>,
}

fn indicator_sum<T: Real>(ctx: &Context<'_, T>, state: &ParameterState<T>, q: usize, zeta: T, tau: &[T]) -> T {
    if !ctx.use_likelihood {
        return T::zero();
    }
    ctx.data
        .individuals
        .iter()
        .zip(&state.alpha)
        .map(|(ind, alpha)| indicator_term(ctx.model, ind, q, zeta, tau, alpha))
        .sum()
}

fn normal_log_prior<T: Real>(priors: &[NormalPrior<T>], x: &[T]) -> T {
    priors.iter().zip(x).map(|(p, &v)| p.log_density(v)).sum()
}

/// MH updates of each indicator's loading and thresholds. Thresholds move
/// in the unconstrained (τ₁, log-increment) space, so every candidate is
/// strictly increasing.
pub fn draw_measurement<T: Real, R: Rng + ?Sized>(
    ctx: &Context<'_, T>,
    state: &ParameterState<T>,
    zeta_proposals: &[Proposal<T>],
    tau_proposals: &[Proposal<T>],
    rng: &mut R,
) -> MeasurementUpdate<T> {
    let n = ctx.model.n_indicators();
    let mut up = MeasurementUpdate {
        zeta: state.zeta.clone(),
        tau: state.tau.clone(),
        zeta_accepted: vec![false; n],
        tau_accepted: vec![false; n],
    };
    for q in 0..n {
        let zeta_prior = ctx.priors.zeta[q];
        let anchored = ctx.priors.anchored[q] && !ctx.priors.reflected[ctx.model.indicators[q].latent];
        let zeta_lp = |z: T| {
            if anchored && z < T::zero() {
                T::neg_infinity()
            } else {
                zeta_prior.log_density(z)
            }
        };
        let mut ll = indicator_sum(ctx, state, q, up.zeta[q], &up.tau[q]);

        let cand = zeta_proposals[q].propose(&[up.zeta[q]], None, rng)[0];
        let lp_cand = zeta_lp(cand);
        let ll_cand = if lp_cand == T::neg_infinity() {
            T::neg_infinity()
        } else {
            indicator_sum(ctx, state, q, cand, &up.tau[q])
        };
        if mh_accept(ll_cand + lp_cand, ll + zeta_lp(up.zeta[q]), T::zero(), rng) {
            up.zeta[q] = cand;
            ll = ll_cand;
            up.zeta_accepted[q] = true;
        }

        let u = tau_to_unconstrained(&up.tau[q]);
        let u_cand = tau_proposals[q].propose(&u, None, rng);
        let tau_cand = tau_from_unconstrained(&u_cand);
        if tau_cand.iter().all(|t| t.is_finite()) && tau_cand.windows(2).all(|w| w[0] < w[1]) {
            let prior = &ctx.priors.tau[q];
            let ll_cand = indicator_sum(ctx, state, q, up.zeta[q], &tau_cand);
            if mh_accept(
                ll_cand + normal_log_prior(prior, &u_cand),
                ll + normal_log_prior(prior, &u),
                T::zero(),
                rng,
            ) {
                up.tau[q] = tau_cand;
                up.tau_accepted[q] = true;
            }
        }
    }
    up
}

#[derive(Debug, Clone)]
pub struct ThetaUpdate<T> {
    pub fixed: Vec<T>,
    /// `None` when the model has no fixed coefficients.
    pub fixed_accepted: Option<bool>,
    pub beta: Vec<Vec<T>>,
    pub beta_accepted: Vec<bool>,
    pub mu: Vec<T>,
    pub omega: Matrix<T>,
}

fn fixed_log_target<T: Real>(ctx: &Context<'_, T>, state: &ParameterState<T>, fixed: &[T], scratch: &mut Vec<T>) -> T {
    let mut t = normal_log_prior(&ctx.priors.fixed, fixed);
    if ctx.use_likelihood {
        for (i, ind) in ctx.data.individuals.iter().enumerate() {
            t = t + choice_loglik(ctx.model, ind, fixed, &state.beta[i], &state.alpha[i], scratch);
        }
    }
    t
}

/// Half the squared Mahalanobis distance of `x` from `mean` under `L Lᵀ`.
fn half_mahalanobis<T: Real>(chol: &Matrix<T>, x: &[T], mean: &[T]) -> T {
    let d: Vec<T> = x.iter().zip(mean).map(|(&a, &b)| a - b).collect();
    let y = solve_lower(chol, &d);
    T::c(0.5) * y.iter().map(|&v| v * v).sum::<T>()
}

/// θ block: fixed coefficients by MH over the whole sample, each `β_i` by
/// MH against `N(μ, ω)` × its choice likelihood, then exact conjugate
/// draws of `μ` and `ω`.
pub fn draw_theta<T: Real, R: Rng + ?Sized, RI: Rng>(
    ctx: &Context<'_, T>,
    state: &ParameterState<T>,
    fixed_proposal: &Proposal<T>,
    beta_proposal: &Proposal<T>,
    rng: &mut R,
    individual_rngs: &mut [RI],
) -> ThetaUpdate<T> {
    let model = ctx.model;
    let mut scratch = Vec::new();

    let mut fixed = state.fixed.clone();
    let mut fixed_accepted = None;
    if model.n_fixed() > 0 {
        let cand = fixed_proposal.propose(&fixed, None, rng);
        let lt_curr = fixed_log_target(ctx, state, &fixed, &mut scratch);
        let lt_cand = fixed_log_target(ctx, state, &cand, &mut scratch);
        let ok = mh_accept(lt_cand, lt_curr, T::zero(), rng);
        if ok {
            fixed = cand;
        }
        fixed_accepted = Some(ok);
    }

    let k = model.n_random();
    let n = ctx.data.len();
    if k == 0 {
        return ThetaUpdate {
            fixed,
            fixed_accepted,
            beta: state.beta.clone(),
            beta_accepted: Vec::new(),
            mu: Vec::new(),
            omega: state.omega.clone(),
        };
    }

    let chol = state.omega.cholesky().expect("omega is positive definite");
    let mut beta = Vec::with_capacity(n);
    let mut beta_accepted = Vec::with_capacity(n);
    for (i, ind) in ctx.data.individuals.iter().enumerate() {
        let rng_i = &mut individual_rngs[i];
        let current = &state.beta[i];
        let cand = beta_proposal.propose(current, Some(&chol), rng_i);
        let mut lt_curr = -half_mahalanobis(&chol, current, &state.mu);
        let mut lt_cand = -half_mahalanobis(&chol, &cand, &state.mu);
        if ctx.use_likelihood {
            lt_curr = lt_curr + choice_loglik(model, ind, &fixed, current, &state.alpha[i], &mut scratch);
            lt_cand = lt_cand + choice_loglik(model, ind, &fixed, &cand, &state.alpha[i], &mut scratch);
        }
        if mh_accept(lt_cand, lt_curr, T::zero(), rng_i) {
            beta.push(cand);
            beta_accepted.push(true);
        } else {
            beta.push(current.clone());
            beta_accepted.push(false);
        }
    }

    let evidence: &[Vec<T>] = if ctx.use_likelihood { &beta } else { &[] };
    let mu = draw_mu(ctx, evidence, &state.omega, rng);
    let omega = draw_omega(ctx, evidence, &mu, rng);
    ThetaUpdate { fixed, fixed_accepted, beta, beta_accepted, mu, omega }
}

/// Result of [`draw_population_moves`].
#[derive(Debug, Clone)]
pub struct PopulationMoves<T> {
    pub beta: Vec<Vec<T>>,
    pub mu: Vec<T>,
    pub omega: Matrix<T>,
    pub shift_accepted: bool,
    pub scale_accepted: bool,
}

fn total_choice_loglik<T: Real>(
    ctx: &Context<'_, T>,
    fixed: &[T],
    beta: &[Vec<T>],
    alpha: &[Vec<T>],
    scratch: &mut Vec<T>,
) -> T {
    ctx.data
        .individuals
        .iter()
        .enumerate()
        .map(|(i, ind)| choice_loglik(ctx.model, ind, fixed, &beta[i], &alpha[i], scratch))
        .sum()
}

fn omega_log_prior<T: Real>(ctx: &Context<'_, T>, omega: &Matrix<T>) -> T {
    let p = ctx.priors;
    let k = omega.rows();
    match ctx.model.covariance() {
        CovarianceMode::Diagonal => (0..k)
            .map(|j| {
                let w = omega[(j, j)];
                -(p.omega_shape + T::one()) * w.ln() - p.omega_rate / w
            })
            .sum(),
        CovarianceMode::Full => {
            let Ok(l) = omega.cholesky() else { return T::neg_infinity() };
            let Ok(inv) = omega.spd_inverse() else { return T::neg_infinity() };
            let log_det: T = (0..k).map(|j| l[(j, j)].ln()).sum::<T>() * T::c(2.0);
            let trace: T = (0..k).map(|j| inv[(j, j)]).sum();
            -(p.omega_df + T::c(k as f64) + T::one()) / T::c(2.0) * log_det - p.omega_scale * trace / T::c(2.0)
        }
    }
}

/// Two joint MH moves that leave every `N(β_i; μ, ω)` density unchanged up
/// to a Jacobian: translating `μ` and all `β_i` by a common step, and
/// rescaling `ω` together with all deviations `β_i − μ` by a common factor
/// per dimension. Only the choice likelihood and the population priors
/// enter the acceptance ratios.
#[allow(clippy::too_many_arguments)]
pub fn draw_population_moves<T: Real, R: Rng + ?Sized>(
    ctx: &Context<'_, T>,
    fixed: &[T],
    alpha: &[Vec<T>],
    mut beta: Vec<Vec<T>>,
    mut mu: Vec<T>,
    mut omega: Matrix<T>,
    shift: &Proposal<T>,
    scale: &Proposal<T>,
    rng: &mut R,
) -> PopulationMoves<T> {
    let k = ctx.model.n_random();
    let mut scratch = Vec::new();
    let mut ll = total_choice_loglik(ctx, fixed, &beta, alpha, &mut scratch);

    let cand_mu = shift.propose(&mu, None, rng);
    let step: Vec<T> = cand_mu.iter().zip(&mu).map(|(&a, &b)| a - b).collect();
    let cand_beta: Vec<Vec<T>> = beta.iter().map(|b| b.iter().zip(&step).map(|(&v, &d)| v + d).collect()).collect();
    let cand_ll = total_choice_loglik(ctx, fixed, &cand_beta, alpha, &mut scratch);
    let shift_accepted = mh_accept(
        cand_ll + normal_log_prior(&ctx.priors.mu, &cand_mu),
        ll + normal_log_prior(&ctx.priors.mu, &mu),
        T::zero(),
        rng,
    );
    if shift_accepted {
        mu = cand_mu;
        beta = cand_beta;
        ll = cand_ll;
    }

    let delta = scale.propose(&vec![T::zero(); k], None, rng);
    let factor: Vec<T> = delta.iter().map(|&d| (d / T::c(2.0)).exp()).collect();
    let mut cand_omega = omega.clone();
    for r in 0..k {
        for c in r..k {
            let v = omega[(r, c)] * factor[r] * factor[c];
            cand_omega[(r, c)] = v;
            cand_omega[(c, r)] = v;
        }
    }
    let cand_beta: Vec<Vec<T>> = beta
        .iter()
        .map(|b| (0..k).map(|j| mu[j] + factor[j] * (b[j] - mu[j])).collect())
        .collect();
    let cand_ll = total_choice_loglik(ctx, fixed, &cand_beta, alpha, &mut scratch);
    let jacobian_weight = match ctx.model.covariance() {
        CovarianceMode::Diagonal => T::one(),
        CovarianceMode::Full => T::c((k + 1) as f64 / 2.0),
    };
    let log_jacobian = jacobian_weight * delta.iter().copied().sum::<T>();
    let scale_accepted = mh_accept(
        cand_ll + omega_log_prior(ctx, &cand_omega) + log_jacobian,
        ll + omega_log_prior(ctx, &omega),
        T::zero(),
        rng,
    );
    if scale_accepted {
        omega = cand_omega;
        beta = cand_beta;
    }
    PopulationMoves { beta, mu, omega, shift_accepted, scale_accepted }
}

/// Conjugate draw of the population mean given the individual coefficients.
pub fn draw_mu<T: Real, R: Rng + ?Sized>(
    ctx: &Context<'_, T>,
    beta: &[Vec<T>],
    omega: &Matrix<T>,
    rng: &mut R,
) -> Vec<T> {
    let k = ctx.model.n_random();
    if k == 0 {
        return Vec::new();
    }
    let n = T::c(beta.len() as f64);
    let mut sum = vec![T::zero(); k];
    for b in beta {
        for (s, &v) in sum.iter_mut().zip(b) {
            *s = *s + v;
        }
    }
    let priors = &ctx.priors.mu;
    match ctx.model.covariance() {
        CovarianceMode::Diagonal => (0..k)
            .map(|j| {
                let w = omega[(j, j)];
                let prec = n / w + T::one() / priors[j].variance;
                let mean = (sum[j] / w + priors[j].mean / priors[j].variance) / prec;
                mean + T::sample_standard_normal(rng) / prec.sqrt()
            })
            .collect(),
        CovarianceMode::Full => {
            let omega_inv = omega.spd_inverse().expect("omega is positive definite");
            let mut prec = omega_inv.scaled(n);
            for j in 0..k {
                prec[(j, j)] = prec[(j, j)] + T::one() / priors[j].variance;
            }
            let mut rhs = omega_inv.mul_vec(&sum);
            for j in 0..k {
                rhs[j] = rhs[j] + priors[j].mean / priors[j].variance;
            }
            let l = prec.cholesky().expect("posterior precision is positive definite");
            let mean = solve_lower_transpose(&l, &solve_lower(&l, &rhs));
            let eps: Vec<T> = (0..k).map(|_| T::sample_standard_normal(rng)).collect();
            let noise = solve_lower_transpose(&l, &eps);
            mean.iter().zip(noise).map(|(&m, e)| m + e).collect()
        }
    }
}

/// Conjugate draw of the population covariance: per-dimension
/// inverse-gamma in diagonal mode, inverse-Wishart otherwise.
pub fn draw_omega<T: Real, R: Rng + ?Sized>(
    ctx: &Context<'_, T>,
    beta: &[Vec<T>],
    mu: &[T],
    rng: &mut R,
) -> Matrix<T> {
    let k = ctx.model.n_random();
    let p = ctx.priors;
    let n = T::c(beta.len() as f64);
    match ctx.model.covariance() {
        CovarianceMode::Diagonal => {
            let diag: Vec<T> = (0..k)
                .map(|j| {
                    let ss: T = beta.iter().map(|b| (b[j] - mu[j]) * (b[j] - mu[j])).sum();
                    sample_inverse_gamma(p.omega_shape + n / T::c(2.0), p.omega_rate + ss / T::c(2.0), rng)
                })
                .collect();
            Matrix::from_diagonal(&diag)
        }
        CovarianceMode::Full => {
            let mut scale = Matrix::identity(k).scaled(p.omega_scale);
            for b in beta {
                let d: Vec<T> = b.iter().zip(mu).map(|(&x, &m)| x - m).collect();
                scale.add_outer(&d, T::one());
            }
            let df = p.omega_df + n;
            let mut jitter = T::zero();
            for attempt in 0..8 {
                let mut s = scale.clone();
                s.add_diagonal(jitter);
                match sample_inverse_wishart(df, &s, rng) {
                    Ok(w) if w.is_positive_definite() => return w,
                    _ => {
                        let base = s.diagonal().iter().fold(T::zero(), |a, &b| a.max(b));
                        jitter = base * T::c(1e-10 * 10f64.powi(attempt));
                        log::warn!("inverse-Wishart draw not positive definite; retrying with jitter {jitter}");
                    }
                }
            }
            log::warn!("inverse-Wishart retries exhausted; keeping the prior scale");
            Matrix::identity(k).scaled(p.omega_scale)
        }
    }
}

/// Inverse-gamma variate with the given shape and scale.
pub fn sample_inverse_gamma<T: Real, R: Rng + ?Sized>(shape: T, scale: T, rng: &mut R) -> T {
    T::one() / T::sample_gamma(shape, T::one() / scale, rng)
}

/// Inverse-Wishart variate `W⁻¹` with `W ~ Wishart(df, scale⁻¹)`, via the
/// Bartlett decomposition.
pub fn sample_inverse_wishart<T: Real, R: Rng + ?Sized>(
    df: T,
    scale: &Matrix<T>,
    rng: &mut R,
) -> Result<Matrix<T>, NotPositiveDefinite> {
    let k = scale.rows();
    let l = scale.spd_inverse()?.cholesky()?;
    let mut a = Matrix::zeros(k, k);
    for i in 0..k {
        let dof = df - T::c(i as f64);
        a[(i, i)] = T::sample_gamma(dof / T::c(2.0), T::c(2.0), rng).sqrt();
        for j in 0..i {
            a[(i, j)] = T::sample_standard_normal(rng);
        }
    }
    let la = l.matmul(&a);
    let wishart = la.matmul(&la.transpose());
    let mut inv = wishart.spd_inverse()?;
    // symmetrize rounding noise
    for r in 0..k {
        for c in (r + 1)..k {
            let v = (inv[(r, c)] + inv[(c, r)]) / T::c(2.0);
            inv[(r, c)] = v;
            inv[(c, r)] = v;
        }
    }
    Ok(inv)
}
