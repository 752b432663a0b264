//! Stochastic block models: Bernoulli likelihood, variational EM, collapsed
//! Metropolis–Hastings, the degree-corrected variant and graph generators.

mod dcsbm;
mod em;
mod generate;
mod likelihood;
mod mcmc;

pub use dcsbm::{
    block_degree_matrix, dcsbm_edge_probability, dcsbm_log_likelihood, dcsbm_params, DcSbmParams, DcVariant,
};
pub use em::{expected_log_likelihood, m_step, sbm_em, EmConfig, EmResult};
pub use generate::{generate_dcsbm, generate_sbm, planted_partition};
pub use likelihood::{block_matrix_mle, sbm_log_likelihood, BlockCounts, SbmParams, B_EPS};
pub use mcmc::{
    acceptance_probability, collapsed_log_posterior, dcsbm_mh, sbm_mh, McmcConfig, McmcResult, SbmPriors, TracePoint,
};
