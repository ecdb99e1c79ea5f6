//! Hierarchical-Bayes estimation of hybrid discrete choice models.
//!
//! Latent attitudes enter multinomial-logit utilities with random
//! coefficients and are measured through ordered-logit Likert indicators.
//! The crate estimates the joint model by Gibbs sampling with
//! Metropolis–Hastings sub-steps and post-processes the posterior into
//! summaries, willingness-to-pay distributions and market-share scenarios.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`.

pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod posterior;
pub mod real;
pub mod rng;
pub mod sampler;
pub mod scenario;

pub use error::{Error, Result};
pub use model::{CompiledModel, ModelSpec};
pub use real::Real;

pub type Matrix = linalg::Matrix<f64>;
pub type ChoiceDataset = model::ChoiceDataset<f64>;
pub type Individual = model::Individual<f64>;
pub type ParameterState = model::ParameterState<f64>;
pub type SamplerConfig = sampler::SamplerConfig<f64>;
pub type Priors = sampler::Priors<f64>;
pub type PosteriorDraws = sampler::PosteriorDraws<f64>;
pub type ShareTable = scenario::ShareTable<f64>;
pub type MwtpRecord = posterior::MwtpRecord<f64>;
pub type RegressionResult = posterior::RegressionResult<f64>;
pub type PosteriorSummary = posterior::PosteriorSummary<f64>;

pub type ChoiceDatasetF32 = model::ChoiceDataset<f32>;
pub type ParameterStateF32 = model::ParameterState<f32>;
pub type PosteriorDrawsF32 = sampler::PosteriorDraws<f32>;
