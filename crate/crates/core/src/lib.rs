//! Bayesian optimization for expensive, derivative-free black-box functions.
//!
//! The crate is organized bottom-up:
//!
//! * [`gp`] - Gaussian-process priors and posteriors, marginal likelihood,
//!   MLE/MAP fitting and slice sampling of hyperparameters.
//! * [`acq`] - acquisition functions: expected improvement, knowledge gradient
//!   (simulation and stochastic gradients), KGCP for noisy data, parallel EI
//!   with Constant Liar batches, and grid entropy search.
//! * [`acqopt`] - maximizers over the feasible box.
//! * [`driver`] - the sequential optimization loop and its ask-tell state.
//! * [`bench`] - synthetic objectives, grid oracles and policy comparison.
//! * [`service`] - campaign persistence, CSV/JSON formats, the HTTP API and CLI.
//!
//! ```
//! use bayesopt::gp::{fit_posterior, Hyperparameters, KernelFamily, ObservationSet};
//! use bayesopt::acq::expected_improvement;
//!
//! let data = ObservationSet::from_parts(1, vec![vec![0.5], vec![2.0]], vec![1.0, 0.2]).unwrap();
//! let hypers =
//!     Hyperparameters::isotropic(KernelFamily::Matern52, 1.0, 1.0, 1, 0.0, 0.0).unwrap();
//! let state = fit_posterior(&data, &hypers).unwrap();
//! let (ei, _grad) = expected_improvement(&state, &[1.2], 1.0);
//! assert!(ei > 0.0);
//! ```

pub mod acq;
pub mod acqopt;
pub mod bench;
pub mod driver;
mod error;
pub mod gp;
pub mod rng;
pub mod service;

pub use error::{Error, Result};
pub use gp::{Bounds, Hyperparameters, ObservationSet};
