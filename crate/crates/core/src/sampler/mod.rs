//! Gibbs sampler with Metropolis–Hastings sub-steps over the latent values,
//! structural coefficients, measurement parameters and utility coefficients.

pub mod blocks;
pub mod chain;
pub mod config;
pub mod diagnostics;
pub mod mh;

pub use blocks::{draw_alpha, draw_gamma, draw_measurement, draw_population_moves, draw_theta, Context, PopulationMoves};
pub use chain::{initial_state, run_chain, run_chain_indexed, run_chains, BlockAcceptance, PosteriorDraws};
pub use config::{NormalPrior, Priors, ProposalScales, ResolvedPriors, SamplerConfig};
pub use diagnostics::{convergence_diagnostics, effective_sample_size, split_rhat, ParameterDiagnostic};
pub use mh::{mh_accept, Proposal};
