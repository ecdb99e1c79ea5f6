use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::linalg::{dot, solve_lower, solve_lower_transpose, Matrix};
use crate::posterior::summary::{normal_cdf, quantile_sorted};
use crate::real::Real;

/// Relative width of the band around zero in which a cost draw counts as
/// numerically zero.
pub const COST_EPS_REL: f64 = 1e-6;
/// Largest tolerated share of cost draws inside that band.
pub const COST_MASS_LIMIT: f64 = 0.01;
/// Ridge added to the normal equations of a rank-deficient design.
pub const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MwtpRecord<T> {
    pub individual_id: String,
    pub attribute: String,
    /// `−β̄_a / β̄_c`; `None` when the cost mean is exactly zero.
    pub value: Option<T>,
    /// SD of the per-draw ratios `−β_a / β_c`; `None` without paired draws.
    pub ratio_sd: Option<T>,
    /// Cost coefficient has non-negligible mass near zero.
    pub unstable: bool,
}

impl<T: Real> MwtpRecord<T> {
    /// Multiplies value and SD by a unit-conversion factor.
    pub fn scaled(mut self, factor: T) -> Self {
        self.value = self.value.map(|v| v * factor);
        self.ratio_sd = self.ratio_sd.map(|s| s * factor.abs());
        self
    }

    pub fn usable(&self) -> bool {
        !self.unstable && self.value.is_some_and(|v| v.is_finite())
    }
}

fn mean<T: Real>(x: &[T]) -> T {
    x.iter().copied().sum::<T>() / T::c(x.len() as f64)
}

fn sample_sd<T: Real>(x: &[T]) -> Option<T> {
    if x.len() < 2 {
        return None;
    }
    let m = mean(x);
    let ss: T = x.iter().map(|&v| (v - m) * (v - m)).sum();
    Some((ss / T::c((x.len() - 1) as f64)).sqrt())
}

/// Individual marginal willingness to pay from paired posterior draws of the
/// attribute coefficient and the cost coefficient.
pub fn mwtp_individual<T: Real>(
    individual_id: &str,
    attribute: &str,
    beta_a_draws: &[T],
    beta_c_draws: &[T],
) -> Result<MwtpRecord<T>> {
    if beta_a_draws.is_empty() || beta_a_draws.len() != beta_c_draws.len() {
        return Err(Error::Config(format!(
            "individual {individual_id}: need equally many non-zero attribute and cost draws, got {} and {}",
            beta_a_draws.len(),
            beta_c_draws.len()
        )));
    }
    let mean_a = mean(beta_a_draws);
    let mean_c = mean(beta_c_draws);
    if mean_c == T::zero() {
        return Ok(MwtpRecord {
            individual_id: individual_id.into(),
            attribute: attribute.into(),
            value: None,
            ratio_sd: None,
            unstable: true,
        });
    }
    let eps = T::c(COST_EPS_REL) * mean_c.abs();
    let near_zero = beta_c_draws.iter().filter(|c| c.abs() < eps).count();
    let unstable = near_zero as f64 / beta_c_draws.len() as f64 > COST_MASS_LIMIT;
    let ratios: Vec<T> = beta_a_draws
        .iter()
        .zip(beta_c_draws)
        .filter(|(_, &c)| c != T::zero())
        .map(|(&a, &c)| -a / c)
        .collect();
    Ok(MwtpRecord {
        individual_id: individual_id.into(),
        attribute: attribute.into(),
        value: Some(-mean_a / mean_c),
        ratio_sd: sample_sd(&ratios),
        unstable,
    })
}

/// As [`mwtp_individual`] when only posterior means and SDs of the two
/// coefficients are available. Instability is judged under a normal
/// approximation of the cost coefficient.
pub fn mwtp_from_moments<T: Real>(
    individual_id: &str,
    attribute: &str,
    mean_a: T,
    mean_c: T,
    sd_c: T,
) -> MwtpRecord<T> {
    let (value, unstable) = if mean_c == T::zero() {
        (None, true)
    } else {
        let eps = COST_EPS_REL * mean_c.to_f64_lossy().abs();
        let m = mean_c.to_f64_lossy();
        let s = sd_c.to_f64_lossy();
        let mass = if s > 0.0 { normal_cdf((eps - m) / s) - normal_cdf((-eps - m) / s) } else { 0.0 };
        (Some(-mean_a / mean_c), mass > COST_MASS_LIMIT)
    };
    MwtpRecord { individual_id: individual_id.into(), attribute: attribute.into(), value, ratio_sd: None, unstable }
}

/// Distribution of individual MWTP values across the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MwtpDistribution<T> {
    pub attribute: String,
    pub n: usize,
    /// Records excluded as unstable or valueless.
    pub n_flagged: usize,
    pub mean: T,
    pub sd: T,
    pub median: T,
    pub min: T,
    pub max: T,
}

pub fn mwtp_distribution<T: Real>(attribute: &str, records: &[MwtpRecord<T>]) -> Result<MwtpDistribution<T>> {
    let mut values: Vec<T> = records.iter().filter(|r| r.usable()).filter_map(|r| r.value).collect();
    if values.is_empty() {
        return Err(Error::Numeric(format!("no usable MWTP values for '{attribute}'")));
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    Ok(MwtpDistribution {
        attribute: attribute.into(),
        n: values.len(),
        n_flagged: records.len() - values.len(),
        mean: mean(&values),
        sd: sample_sd(&values).unwrap_or_else(T::zero),
        median: quantile_sorted(&values, 0.5),
        min: values[0],
        max: values[values.len() - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionCoefficient<T> {
    pub name: String,
    pub estimate: T,
    /// `None` without residual degrees of freedom.
    pub std_error: Option<T>,
    pub p_value: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult<T> {
    pub intercept: RegressionCoefficient<T>,
    pub coefficients: Vec<RegressionCoefficient<T>>,
    pub r_squared: T,
    pub residual_variance: T,
    pub n: usize,
    pub ridge_applied: bool,
    /// Constant response; R² reported as 0.
    pub zero_variance_response: bool,
}

impl<T: Real> RegressionResult<T> {
    pub fn coefficient(&self, name: &str) -> Option<&RegressionCoefficient<T>> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

/// Cholesky factor of a normal-equations matrix, or `None` when a pivot is
/// negligible relative to its diagonal entry.
fn well_conditioned_cholesky<T: Real>(a: &Matrix<T>) -> Option<Matrix<T>> {
    let l = a.cholesky().ok()?;
    let tol = T::c(1e-12);
    (0..a.rows()).all(|i| l[(i, i)] * l[(i, i)] > tol * a[(i, i)].abs()).then_some(l)
}

/// Ordinary least squares of `y` on an intercept plus the columns of `x`
/// (`x[row][col]`) through the normal equations.
pub fn fit_ols<T: Real>(y: &[T], x: &[Vec<T>], names: &[String]) -> Result<RegressionResult<T>> {
    let n = y.len();
    let p = names.len();
    if x.len() != n || x.iter().any(|r| r.len() != p) {
        return Err(Error::Config("regression design does not match the response length".into()));
    }
    if n < p + 1 {
        return Err(Error::Config(format!("regression needs at least {} rows, got {n}", p + 1)));
    }
    let design: Vec<Vec<T>> = x
        .iter()
        .map(|r| std::iter::once(T::one()).chain(r.iter().copied()).collect())
        .collect();
    let d = p + 1;
    let mut xtx = Matrix::zeros(d, d);
    let mut xty = vec![T::zero(); d];
    for (row, &yi) in design.iter().zip(y) {
        xtx.add_outer(row, T::one());
        for (acc, &v) in xty.iter_mut().zip(row) {
            *acc = *acc + v * yi;
        }
    }
    let (l, ridge_applied) = match well_conditioned_cholesky(&xtx) {
        Some(l) => (l, false),
        None => {
            log::warn!("rank-deficient regression design; applying ridge {RIDGE}");
            let mut ridged = xtx.clone();
            ridged.add_diagonal(T::c(RIDGE));
            let l = ridged
                .cholesky()
                .map_err(|_| Error::Numeric("regression normal equations are singular".into()))?;
            (l, true)
        }
    };
    let coef = solve_lower_transpose(&l, &solve_lower(&l, &xty));

    let residuals: Vec<T> = design.iter().zip(y).map(|(row, &yi)| yi - dot(row, &coef)).collect();
    let ssr: T = residuals.iter().map(|&r| r * r).sum();
    let y_mean = mean(y);
    let sst: T = y.iter().map(|&v| (v - y_mean) * (v - y_mean)).sum();
    let zero_variance_response = sst == T::zero();
    let r_squared = if zero_variance_response {
        T::zero()
    } else {
        (T::one() - ssr / sst).max(T::zero()).min(T::one())
    };
    let df = n - d;
    let residual_variance = if df > 0 { ssr / T::c(df as f64) } else { T::zero() };

    let inverse_diag: Vec<T> = (0..d)
        .map(|j| {
            let mut e = vec![T::zero(); d];
            e[j] = T::one();
            solve_lower_transpose(&l, &solve_lower(&l, &e))[j]
        })
        .collect();
    let t_dist = (df > 0).then(|| StudentsT::new(0.0, 1.0, df as f64).expect("positive degrees of freedom"));
    let make = |j: usize, name: String| {
        let (std_error, p_value) = match &t_dist {
            Some(t) => {
                let se = (residual_variance * inverse_diag[j]).max(T::zero()).sqrt();
                let p = if se > T::zero() {
                    let stat = (coef[j] / se).to_f64_lossy().abs();
                    T::c((2.0 * (1.0 - t.cdf(stat))).clamp(0.0, 1.0))
                } else if coef[j] == T::zero() {
                    T::one()
                } else {
                    T::zero()
                };
                (Some(se), Some(p))
            }
            None => (None, None),
        };
        RegressionCoefficient { name, estimate: coef[j], std_error, p_value }
    };
    Ok(RegressionResult {
        intercept: make(0, "intercept".into()),
        coefficients: names.iter().enumerate().map(|(j, nm)| make(j + 1, nm.clone())).collect(),
        r_squared,
        residual_variance,
        n,
        ridge_applied,
        zero_variance_response,
    })
}

/// Regresses individual MWTP values on socioeconomic characteristics.
/// `q[k]` holds the characteristics of `records[k]`; unstable or valueless
/// records are dropped together with their rows.
pub fn mwtp_regression<T: Real>(records: &[MwtpRecord<T>], q: &[Vec<T>], names: &[String]) -> Result<RegressionResult<T>> {
    if records.len() != q.len() {
        return Err(Error::Config(format!(
            "{} MWTP records but {} covariate rows",
            records.len(),
            q.len()
        )));
    }
    let (y, x): (Vec<T>, Vec<Vec<T>>) = records
        .iter()
        .zip(q)
        .filter(|(r, _)| r.usable())
        .map(|(r, row)| (r.value.expect("usable record has a value"), row.clone()))
        .unzip();
    fit_ols(&y, &x, names)
}

/// Divides every column by its sample SD so coefficients are comparable.
/// Constant columns are left unchanged. Returns the SDs used.
pub fn scale_unit_variance<T: Real>(q: &[Vec<T>]) -> (Vec<Vec<T>>, Vec<T>) {
    let p = q.first().map_or(0, Vec::len);
    let sds: Vec<T> = (0..p)
        .map(|j| {
            let col: Vec<T> = q.iter().map(|r| r[j]).collect();
            match sample_sd(&col) {
                Some(s) if s > T::zero() => s,
                _ => T::one(),
            }
        })
        .collect();
    let scaled = q.iter().map(|r| r.iter().zip(&sds).map(|(&v, &s)| v / s).collect()).collect();
    (scaled, sds)
}
