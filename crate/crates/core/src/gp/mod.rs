//! Gaussian-process surrogate: kernels, mean functions, exact posterior
//! inference, marginal likelihood, and hyperparameter estimation.

mod fit;
mod hyper;
mod kernel;
mod likelihood;
mod mean;
mod posterior;
mod slice;
mod types;

pub use fit::{fit_hyperparameters, fit_objective, FitMode, HyperBounds, HyperFit};
pub use hyper::{HyperPrior, Hyperparameters, ParamLayout, ParamPrior};
pub use kernel::{kernel_eval, KernelFamily, KernelSpec};
pub use likelihood::log_marginal_likelihood_grad;
pub use mean::{mean_eval, BasisFunction, MeanSpec};
pub use posterior::{
    fit_posterior, log_marginal_likelihood, predict, predict_joint, psd_factor, sample_joint,
    JointPredictive, Moments, PosteriorState, Predictive, JITTER_MAX, JITTER_START, VARIANCE_CLAMP,
};
pub(crate) use posterior::{backward_solve, draw, forward_solve};
pub use slice::{predict_marginalized, slice_sample_hyperparameters, MixturePredictive};
pub use types::{Bounds, ObservationSet};

/// Multiplier for the 95% credible interval `mean +/- 1.96 sd`.
pub const CREDIBLE_95: f64 = 1.96;
