//! Data generation: covariates as functions of a stationary finite Markov
//! chain and conditionally independent heavy-tailed errors.

pub mod chain;
pub mod covariates;
pub mod dataset;
pub mod errors;

pub use chain::{
    make_chain_with_gamma, make_chain_with_gamma_pi, simulate_chain, simulate_chain_replicate,
    spectral_gamma, stationary_distribution, ChainSampler, ChainSpec,
};
pub use covariates::CovariateMap;
pub use dataset::{
    generate_dataset, generate_dataset_replicate, metadata_path, read_dataset, verify_dataset, write_dataset,
    Dataset, Provenance,
};
pub use errors::{moment_vdelta, sample_errors, sample_errors_replicate, ErrorFamily, ErrorModel};
