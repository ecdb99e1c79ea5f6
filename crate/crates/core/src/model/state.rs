use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::spec::{CompiledModel, CovarianceMode, Slot, Source};
use crate::real::Real;

/// One point in parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterState<T> {
    /// Structural coefficients, latent variables × covariates. Entries for
    /// covariates not attached to a latent variable stay at zero.
    pub gamma: Matrix<T>,
    /// Indicator loadings.
    pub zeta: Vec<T>,
    /// Strictly increasing thresholds per indicator.
    pub tau: Vec<Vec<T>>,
    /// Coefficients shared by every individual (ASCs and fixed terms).
    pub fixed: Vec<T>,
    /// Population mean of the random coefficients.
    pub mu: Vec<T>,
    pub omega: Matrix<T>,
    /// Per-individual random coefficients; empty when not tracked.
    pub beta: Vec<Vec<T>>,
    /// Per-individual latent values; empty when not tracked.
    pub alpha: Vec<Vec<T>>,
}

impl<T: Real> ParameterState<T> {
    /// All-zero population parameters with identity covariance and
    /// equally spaced thresholds.
    pub fn zeros(model: &CompiledModel) -> Self {
        Self {
            gamma: Matrix::zeros(model.n_latent(), model.n_covariates()),
            zeta: vec![T::zero(); model.n_indicators()],
            tau: model
                .indicators
                .iter()
                .map(|ind| {
                    let m = T::c((ind.categories as f64 - 2.0) / 2.0);
                    (0..ind.categories - 1).map(|k| T::c(k as f64) - m).collect()
                })
                .collect(),
            fixed: vec![T::zero(); model.n_fixed()],
            mu: vec![T::zero(); model.n_random()],
            omega: Matrix::identity(model.n_random()),
            beta: Vec::new(),
            alpha: Vec::new(),
        }
    }

    /// Flips the sign of latent variable `l` throughout: its values, its
    /// structural row, its loadings and every utility coefficient it enters
    /// (including the matching rows and columns of `ω`). Every likelihood
    /// term is unchanged.
    pub fn reflect_latent(&mut self, model: &CompiledModel, l: usize) {
        for c in 0..self.gamma.cols() {
            self.gamma[(l, c)] = -self.gamma[(l, c)];
        }
        for &q in &model.latent_indicators[l] {
            self.zeta[q] = -self.zeta[q];
        }
        for a in &mut self.alpha {
            a[l] = -a[l];
        }
        for (j, c) in model.fixed.iter().enumerate() {
            if c.source == Source::Latent(l) {
                self.fixed[j] = -self.fixed[j];
            }
        }
        let k = model.random.len();
        for (j, c) in model.random.iter().enumerate() {
            if c.source != Source::Latent(l) {
                continue;
            }
            self.mu[j] = -self.mu[j];
            for b in &mut self.beta {
                b[j] = -b[j];
            }
            for m in (0..k).filter(|&m| m != j) {
                self.omega[(j, m)] = -self.omega[(j, m)];
                self.omega[(m, j)] = -self.omega[(m, j)];
            }
        }
    }

    pub fn has_individuals(&self) -> bool {
        !self.beta.is_empty() || !self.alpha.is_empty()
    }

    pub fn coefficient(&self, slot: Slot, individual: Option<usize>) -> T {
        match slot {
            Slot::Fixed(f) => self.fixed[f],
            Slot::Random(k) => match individual {
                Some(i) if !self.beta.is_empty() => self.beta[i][k],
                _ => self.mu[k],
            },
        }
    }

    pub fn validate(&self, model: &CompiledModel) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if self.gamma.rows() != model.n_latent() || self.gamma.cols() != model.n_covariates() {
            return bad("gamma has the wrong shape".into());
        }
        if self.zeta.len() != model.n_indicators() || self.tau.len() != model.n_indicators() {
            return bad("measurement block has the wrong length".into());
        }
        for (q, t) in self.tau.iter().enumerate() {
            if t.len() + 1 != model.indicators[q].categories {
                return bad(format!("tau for '{}' has the wrong length", model.indicators[q].id));
            }
            check_thresholds(t)?;
        }
        if self.fixed.len() != model.n_fixed() || self.mu.len() != model.n_random() {
            return bad("coefficient vectors have the wrong length".into());
        }
        if self.omega.rows() != model.n_random() || !self.omega.is_square() {
            return bad("omega has the wrong shape".into());
        }
        if model.n_random() > 0 && !self.omega.is_positive_definite() {
            return bad("omega is not positive definite".into());
        }
        if model.covariance() == CovarianceMode::Diagonal && !self.omega.is_diagonal() {
            return bad("omega must be diagonal in diagonal mode".into());
        }
        let all_finite = self.gamma.as_slice().iter().chain(&self.zeta).chain(&self.fixed).chain(&self.mu)
            .all(|v| v.is_finite());
        if !all_finite {
            return bad("non-finite population parameter".into());
        }
        Ok(())
    }

    /// Population-level parameters in `CompiledModel::population_names` order.
    pub fn population_vector(&self, model: &CompiledModel) -> Vec<T> {
        let mut out = Vec::new();
        for (l, covs) in model.latent_covariates.iter().enumerate() {
            out.extend(covs.iter().map(|&c| self.gamma[(l, c)]));
        }
        out.extend(&self.zeta);
        for t in &self.tau {
            out.extend(t);
        }
        out.extend(&self.fixed);
        out.extend(&self.mu);
        let k = model.n_random();
        for r in 0..k {
            match model.covariance() {
                CovarianceMode::Diagonal => out.push(self.omega[(r, r)]),
                CovarianceMode::Full => out.extend((r..k).map(|c| self.omega[(r, c)])),
            }
        }
        out
    }

    /// Inverse of [`ParameterState::population_vector`]; per-individual blocks are left empty.
    pub fn from_population_vector(model: &CompiledModel, values: &[T]) -> Result<Self> {
        let expected = model.population_names().len();
        if values.len() != expected {
            return Err(Error::Parameter(format!(
                "expected {expected} population values, got {}",
                values.len()
            )));
        }
        let mut it = values.iter().copied();
        let mut s = Self::zeros(model);
        for (l, covs) in model.latent_covariates.iter().enumerate() {
            for &c in covs {
                s.gamma[(l, c)] = it.next().unwrap();
            }
        }
        for z in s.zeta.iter_mut() {
            *z = it.next().unwrap();
        }
        for t in s.tau.iter_mut() {
            for v in t.iter_mut() {
                *v = it.next().unwrap();
            }
        }
        for f in s.fixed.iter_mut() {
            *f = it.next().unwrap();
        }
        for m in s.mu.iter_mut() {
            *m = it.next().unwrap();
        }
        let k = model.n_random();
        for r in 0..k {
            match model.covariance() {
                CovarianceMode::Diagonal => s.omega[(r, r)] = it.next().unwrap(),
                CovarianceMode::Full => {
                    for c in r..k {
                        let v = it.next().unwrap();
                        s.omega[(r, c)] = v;
                        s.omega[(c, r)] = v;
                    }
                }
            }
        }
        Ok(s)
    }
}

/// Errors unless `tau` is finite and strictly increasing.
pub fn check_thresholds<T: Real>(tau: &[T]) -> Result<()> {
    if tau.iter().any(|t| !t.is_finite()) || tau.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Parameter(format!("thresholds not strictly increasing: {tau:?}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::spec::tests::parking_spec;

    #[test]
    fn population_vector_round_trip() {
        let m = parking_spec().compile().unwrap();
        let mut s = ParameterState::<f64>::zeros(&m);
        s.gamma[(0, 1)] = 0.3;
        s.zeta[1] = -0.4;
        s.fixed[2] = 1.25;
        s.mu[1] = 0.7;
        s.omega[(1, 1)] = 2.0;
        let v = s.population_vector(&m);
        assert_eq!(v.len(), m.population_names().len());
        let back = ParameterState::from_population_vector(&m, &v).unwrap();
        assert_eq!(back, s);
        s.validate(&m).unwrap();
    }

    #[test]
    fn zero_state_thresholds_increase() {
        let m = parking_spec().compile().unwrap();
        let s = ParameterState::<f32>::zeros(&m);
        for t in &s.tau {
            check_thresholds(t).unwrap();
        }
    }

    #[test]
    fn non_increasing_tau_rejected() {
        let m = parking_spec().compile().unwrap();
        let mut s = ParameterState::<f64>::zeros(&m);
        s.tau[0][2] = s.tau[0][1];
        assert!(matches!(s.validate(&m), Err(Error::Parameter(_))));
    }
}
