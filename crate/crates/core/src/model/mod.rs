//! Domain types, utility and probability kernels, and the joint likelihood.

pub mod data;
pub mod kernels;
pub mod likelihood;
pub mod spec;
pub mod state;

pub use data::{ChoiceDataset, Individual};
pub use kernels::{
    mnl_probabilities, ordered_logit_pmf, predict_choice, structural_mean, systematic_utility,
};
pub use likelihood::{joint_loglik_mc, joint_loglik_quadrature, QuadratureGrid};
pub use spec::{
    Alternative, CoefficientKind, CompiledModel, CovarianceMode, IndicatorSpec, LatentVariableSpec,
    ModelSpec, Slot, Source, UtilityTerm,
};
pub use state::ParameterState;
