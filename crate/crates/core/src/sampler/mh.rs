//! Metropolis–Hastings acceptance and adaptive random-walk proposals.

use rand::Rng;

use crate::linalg::Matrix;
use crate::real::Real;

/// Accepts with probability `min{1, exp(cand − curr + correction)}`.
///
/// `log_proposal_correction` is `ln p(cand → curr) − ln p(curr → cand)` and
/// is zero for symmetric random walks. A uniform variate is consumed only
/// when the log ratio is negative.
pub fn mh_accept<T: Real, R: Rng + ?Sized>(
    log_target_cand: T,
    log_target_curr: T,
    log_proposal_correction: T,
    rng: &mut R,
) -> bool {
    if log_target_cand == T::neg_infinity() && log_target_curr == T::neg_infinity() {
        log::warn!("both candidate and current log targets are -inf; rejecting");
        return false;
    }
    if log_target_cand.is_nan() {
        return false;
    }
    if log_target_curr == T::neg_infinity() {
        return true;
    }
    let log_ratio = log_target_cand - log_target_curr + log_proposal_correction;
    if log_ratio.is_nan() {
        return false;
    }
    if log_ratio >= T::zero() {
        return true;
    }
    T::sample_open01(rng).ln() < log_ratio
}

/// Running mean and covariance of a block's states, used to shape its
/// proposal during burn-in.
#[derive(Debug, Clone)]
struct ShapeLearner<T> {
    n: usize,
    mean: Vec<T>,
    m2: Matrix<T>,
}

impl<T: Real> ShapeLearner<T> {
    fn new(dim: usize) -> Self {
        Self { n: 0, mean: vec![T::zero(); dim], m2: Matrix::zeros(dim, dim) }
    }

    fn push(&mut self, x: &[T]) {
        self.n += 1;
        let n = T::c(self.n as f64);
        let delta: Vec<T> = x.iter().zip(&self.mean).map(|(&a, &m)| a - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m = *m + *d / n;
        }
        let delta2: Vec<T> = x.iter().zip(&self.mean).map(|(&a, &m)| a - m).collect();
        for r in 0..delta.len() {
            for c in 0..delta.len() {
                self.m2[(r, c)] = self.m2[(r, c)] + delta[r] * delta2[c];
            }
        }
    }

    fn covariance(&self) -> Matrix<T> {
        self.m2.scaled(T::one() / T::c((self.n.max(2) - 1) as f64))
    }
}

/// Gaussian random walk `x + s · L ε` whose scale `s` follows a
/// Robbins–Monro recursion toward a target acceptance rate while adapting.
#[derive(Debug, Clone)]
pub struct Proposal<T> {
    log_scale: T,
    zero: bool,
    pub target: f64,
    shape: Option<Matrix<T>>,
    learner: Option<ShapeLearner<T>>,
    accepted: u64,
    proposed: u64,
}

impl<T: Real> Proposal<T> {
    /// Target acceptance 0.30 for scalar blocks and 0.23 for vector blocks.
    pub fn new(initial_scale: T, dim: usize) -> Self {
        Self {
            log_scale: if initial_scale > T::zero() { initial_scale.ln() } else { T::zero() },
            zero: !(initial_scale > T::zero()),
            target: if dim <= 1 { 0.30 } else { 0.23 },
            shape: None,
            learner: None,
            accepted: 0,
            proposed: 0,
        }
    }

    pub fn scale(&self) -> T {
        if self.zero {
            T::zero()
        } else {
            self.log_scale.exp()
        }
    }

    /// Candidate `x + s · L ε`; `shape` overrides the learned shape (used for
    /// proposals proportional to the current population covariance).
    pub fn propose<R: Rng + ?Sized>(&self, x: &[T], shape: Option<&Matrix<T>>, rng: &mut R) -> Vec<T> {
        let s = self.scale();
        let eps: Vec<T> = x.iter().map(|_| T::sample_standard_normal(rng)).collect();
        match shape.or(self.shape.as_ref()) {
            Some(l) => {
                let step = l.mul_vec(&eps);
                x.iter().zip(step).map(|(&v, d)| v + s * d).collect()
            }
            None => x.iter().zip(eps).map(|(&v, e)| v + s * e).collect(),
        }
    }

    pub fn record(&mut self, accepted: u64, proposed: u64) {
        self.accepted += accepted;
        self.proposed += proposed;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn reset_counts(&mut self) {
        self.accepted = 0;
        self.proposed = 0;
    }

    /// One Robbins–Monro step with gain `(t + 1)^-0.6`.
    pub fn adapt(&mut self, t: usize, observed_rate: f64) {
        if self.zero {
            return;
        }
        let gain = ((t + 1) as f64).powf(-0.6);
        let next = self.log_scale.to_f64_lossy() + gain * (observed_rate - self.target);
        self.log_scale = T::c(next.clamp(-12.0, 6.0));
    }

    pub fn learn(&mut self, x: &[T]) {
        self.learner.get_or_insert_with(|| ShapeLearner::new(x.len())).push(x);
    }

    /// Replaces the proposal shape with the Cholesky factor of the learned
    /// covariance. The first time, the scale is reset to `2.38/√d`.
    pub fn refresh_shape(&mut self) {
        let Some(learner) = &self.learner else { return };
        let d = learner.mean.len();
        if d == 0 || learner.n < 2 * d + 20 {
            return;
        }
        let mut cov = learner.covariance();
        let jitter = cov.diagonal().iter().fold(T::zero(), |a, &b| a.max(b)) * T::c(1e-8) + T::c(1e-12);
        cov.add_diagonal(jitter);
        if let Ok(l) = cov.cholesky() {
            if self.shape.is_none() && !self.zero {
                self.log_scale = T::c((2.38 / (d as f64).sqrt()).ln());
            }
            self.shape = Some(l);
        }
    }
}
