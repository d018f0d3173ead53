//! Adaptive Huber regression for high-dimensional linear models whose
//! covariates are functions of a stationary Markov chain and whose errors
//! are heavy tailed.
//!
//! The estimator is
//!
//! ```text
//! beta_hat = argmin_beta (1/n) sum_i h_tau(y_i - x_i' beta) + lambda ||beta||_1
//! ```
//!
//! with `h_tau` the Huber loss. The crate is organised as:
//!
//! * [`huber`]: the loss, its derivative and the empirical objective;
//! * [`solver`]: proximal gradient minimisation with a KKT certificate;
//! * [`adaptive`]: the rate-optimal choice of `tau` and `lambda` given
//!   `(n, d, delta, gamma)`;
//! * [`markov`]: finite reversible chains with exact spectral gap, heavy
//!   tailed error models and dataset generation;
//! * [`diagnostics`]: empirical versions of the quantities the error
//!   analysis bounds.
//!
//! ```
//! use ahr_core::adaptive::{select_lambda, select_tau, AdaptiveSpec};
//! use ahr_core::huber::HuberConfig;
//! use ahr_core::markov::{generate_dataset, make_chain_with_gamma, CovariateMap, ErrorFamily, ErrorModel};
//! use ahr_core::huber::TruthSpec;
//! use ahr_core::rng::{stream_rng, Component};
//! use ahr_core::solver::{fit, SolverConfig};
//! use ndarray::Array1;
//!
//! let (n, d, m) = (400, 20, 40);
//! let chain = make_chain_with_gamma(m, 0.5)?;
//! let mut rng = stream_rng(1, Component::Covariates, 0);
//! let cov = CovariateMap::gaussian(m, d, chain.stationary(), &mut rng)?;
//! let err = ErrorModel::homoskedastic(ErrorFamily::StudentT { nu: 3.0 }, m, 1.0)?;
//! let mut beta = Array1::zeros(d);
//! beta[0] = 1.0;
//! beta[1] = -1.0;
//! let truth = TruthSpec::new(beta)?;
//! let ds = generate_dataset(&chain, &cov, &err, &truth, n, 7)?;
//!
//! let spec = AdaptiveSpec::new(n, d, 1.0, chain.gamma())?;
//! let cfg = HuberConfig::new(select_tau(&spec)?, select_lambda(&spec)?)?;
//! let res = fit(&ds.problem, &cfg, &SolverConfig::default(), None)?;
//! assert!(res.converged);
//! # Ok::<(), ahr_core::AhrError>(())
//! ```

pub mod adaptive;
pub mod diagnostics;
pub mod error;
pub mod huber;
pub mod markov;
pub mod rng;
pub mod solver;

pub use error::{AhrError, Result};

// The guide under `book/` is compiled as doctests so its snippets stay in
// sync with the API. The experiments chapter lives in `ahr-cli`.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/huber.md")]
    mod huber {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/adaptive.md")]
    mod adaptive {}
    #[doc = include_str!("../../../book/src/markov.md")]
    mod markov {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
}
