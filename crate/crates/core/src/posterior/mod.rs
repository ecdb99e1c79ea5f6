//! Posterior summaries, sign probabilities and willingness to pay.

pub mod individual;
pub mod mwtp;
pub mod summary;

pub use individual::{individual_moments, mwtp_records, plugin_choice_loglik, IndividualMoments};
pub use mwtp::{
    fit_ols, mwtp_distribution, mwtp_from_moments, mwtp_individual, mwtp_regression, scale_unit_variance,
    MwtpDistribution, MwtpRecord, RegressionCoefficient, RegressionResult,
};
pub use summary::{
    fit_statistics, normal_cdf, sign_probability, summarize, summarize_values, FitStatistics, ParameterSummary,
    PosteriorSummary, Sign, StreamingMoments,
};
