//! Acquisition functions: expected improvement, knowledge gradient by
//! simulation with stochastic gradients, KGCP, parallel expected improvement
//! and grid entropy search.
//!
//! The factorization jitter acts as a nugget on the latent function. At
//! points that coincide with an observation, acquisitions use the latent
//! moments under that nugget model (see [`observed_moments`]), so re-observing
//! a noise-free value is deterministic.

mod ei;
mod es;
mod kg;
mod kgcp;
pub mod normal;
mod qei;

use serde::{Deserialize, Serialize};

use crate::acqopt::{multistart_deterministic, AscentConfig, MaximizerResult};
use crate::error::{Error, Result};
use crate::gp::{forward_solve, Bounds, PosteriorState};
use crate::rng::Rng;

pub use ei::{ei_closed_form, expected_improvement, maximize_ei, SIGMA_FLOOR};
pub use es::{argmax_entropy, entropy_search_grid, entropy_search_repeated, entropy_search_scores, tensor_grid};
pub use kg::{
    fantasy_scale, kg_estimate, kg_gradient_estimate, FantasyUpdate, GradientEstimate, InnerDomain,
    KnowledgeGradient,
};
pub use kgcp::kgcp;
pub use qei::{constant_liar_batch, parallel_ei, LieValue};

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Replications that contributed.
    pub replications: usize,
    /// Replications dropped after an inner failure.
    pub dropped: usize,
}

impl McEstimate {
    pub(crate) fn from_samples(samples: &[f64], dropped: usize) -> Self {
        let (mean, se) = mean_and_se(samples);
        Self { value: mean, std_error: se, replications: samples.len(), dropped }
    }
}

pub(crate) fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    if samples.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub(crate) fn check_drops(dropped: usize, total: usize, what: &str) -> Result<()> {
    if dropped * 10 > total {
        return Err(Error::numerical(format!(
            "{what}: {dropped} of {total} replications failed in the inner maximization"
        )));
    }
    Ok(())
}

/// Index of the first observation located exactly at `x`.
pub fn observed_index(state: &PosteriorState, x: &[f64]) -> Option<usize> {
    state.data().points().iter().position(|p| p.as_slice() == x)
}

/// Latent mean and variance at observation `i` with the jitter treated as a
/// nugget: `y_i - s2 w_i` and `s2 - s2^2 [(K + D)^{-1}]_ii` for noise `s2`.
pub fn observed_moments(state: &PosteriorState, i: usize) -> (f64, f64) {
    let noise = state.hypers().noise_variance;
    let y = state.data().values()[i];
    if noise == 0.0 {
        return (y, 0.0);
    }
    let mut e = vec![0.0; state.len()];
    e[i] = 1.0;
    forward_solve(state.chol(), &mut e);
    let w_ii: f64 = e.iter().map(|v| v * v).sum();
    (y - noise * state.weights()[i], (noise - noise * noise * w_ii).max(0.0))
}

/// `max_i` of the latent posterior mean over the evaluated points.
pub fn best_observed_mean(state: &PosteriorState) -> f64 {
    (0..state.len())
        .map(|i| observed_moments(state, i).0)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// EI incumbent: the best observed value for noise-free data, otherwise the
/// best posterior mean at an evaluated point.
pub fn default_ei_incumbent(state: &PosteriorState) -> f64 {
    if state.hypers().noise_variance == 0.0 {
        state.data().values().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        best_observed_mean(state)
    }
}

/// Maximizes the posterior mean over `bounds` from `R` uniform starts plus
/// the evaluated point with the best latent mean.
pub fn maximize_posterior_mean(
    state: &PosteriorState,
    bounds: &Bounds,
    config: &AscentConfig,
    rng: &mut Rng,
) -> Result<MaximizerResult> {
    let anchors: Vec<Vec<f64>> = (0..state.len())
        .map(|i| (i, observed_moments(state, i).0))
        .fold(None, |best: Option<(usize, f64)>, (i, m)| match best {
            Some((_, b)) if b >= m => best,
            _ => Some((i, m)),
        })
        .map(|(i, _)| vec![state.data().points()[i].clone()])
        .unwrap_or_default();
    multistart_deterministic(|x| state.posterior_mean_grad(x), bounds, config, &anchors, rng)
}

/// Reference values for the current posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incumbent {
    /// `f*_n`: the largest observed value.
    pub best_observed: f64,
    /// `mu*_n`: the maximum of the posterior mean over the domain.
    pub best_posterior_mean: f64,
    /// `mu**_n`: the maximum of the posterior mean over evaluated points.
    pub best_observed_mean: f64,
    pub argmax_posterior_mean: Vec<f64>,
}

impl Incumbent {
    pub fn compute(state: &PosteriorState, bounds: &Bounds, config: &AscentConfig, rng: &mut Rng) -> Result<Self> {
        if state.is_empty() {
            return Err(Error::invalid("incumbent needs at least one observation"));
        }
        let best_observed = state.data().values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let best_observed_mean = best_observed_mean(state);
        let m = maximize_posterior_mean(state, bounds, config, rng)?;
        Ok(Self {
            best_observed,
            best_posterior_mean: m.value.max(best_observed_mean),
            best_observed_mean,
            argmax_posterior_mean: m.argmax,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QeiMethod {
    /// Candidate batches scored by Monte-Carlo parallel EI.
    JointMc,
    #[default]
    ConstantLiar,
}

fn default_q() -> usize {
    2
}
fn default_qei_replications() -> usize {
    2000
}
fn default_kg_eval() -> usize {
    1000
}
fn default_kg_grad() -> usize {
    4
}
fn default_restarts() -> usize {
    10
}
fn default_iterations() -> usize {
    100
}
fn default_step() -> f64 {
    4.0
}
fn default_grid() -> usize {
    50
}
fn default_quantiles() -> usize {
    10
}
fn default_argmax_samples() -> usize {
    1000
}

/// Which acquisition function a policy maximizes, with its Monte-Carlo sizes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AcquisitionSpec {
    #[default]
    Ei,
    Kg {
        #[serde(default = "default_restarts")]
        restarts: usize,
        #[serde(default = "default_iterations")]
        iterations: usize,
        #[serde(default = "default_step")]
        step_constant: f64,
        /// Replications of the value estimate used to rank final candidates.
        #[serde(default = "default_kg_eval")]
        eval_replications: usize,
        /// Replications averaged into each stochastic gradient.
        #[serde(default = "default_kg_grad")]
        gradient_replications: usize,
    },
    Kgcp,
    Qei {
        #[serde(default = "default_q")]
        q: usize,
        #[serde(default = "default_qei_replications")]
        replications: usize,
        #[serde(default)]
        method: QeiMethod,
        #[serde(default)]
        lie: LieValue,
    },
    Es {
        /// Points per dimension of the tensor grid.
        #[serde(default = "default_grid")]
        grid_size: usize,
        #[serde(default = "default_quantiles")]
        fantasy_quantiles: usize,
        #[serde(default = "default_argmax_samples")]
        argmax_samples: usize,
    },
}

impl AcquisitionSpec {
    /// Standard knowledge-gradient budget: `R = 10`, `T = 100`, `a = 4`, `J = 1000`.
    pub fn kg_default() -> Self {
        Self::Kg {
            restarts: default_restarts(),
            iterations: default_iterations(),
            step_constant: default_step(),
            eval_replications: default_kg_eval(),
            gradient_replications: default_kg_grad(),
        }
    }

    pub fn batch_size(&self) -> usize {
        match self {
            Self::Qei { q, .. } => *q,
            _ => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Ei => "ei",
            Self::Kg { .. } => "kg",
            Self::Kgcp => "kgcp",
            Self::Qei { .. } => "qei",
            Self::Es { .. } => "es",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: usize, name: &str| {
            if v == 0 {
                Err(Error::invalid(format!("{name} must be >= 1")))
            } else {
                Ok(())
            }
        };
        match *self {
            Self::Ei | Self::Kgcp => Ok(()),
            Self::Kg { restarts, iterations, step_constant, eval_replications, gradient_replications } => {
                positive(restarts, "restarts")?;
                positive(iterations, "iterations")?;
                if eval_replications < 2 {
                    return Err(Error::invalid("eval_replications must be >= 2"));
                }
                positive(gradient_replications, "gradient_replications")?;
                if !(step_constant > 0.0) || !step_constant.is_finite() {
                    return Err(Error::invalid("step_constant must be positive"));
                }
                Ok(())
            }
            Self::Qei { q, replications, .. } => {
                positive(q, "q")?;
                if replications < 2 {
                    return Err(Error::invalid("replications must be >= 2"));
                }
                Ok(())
            }
            Self::Es { grid_size, fantasy_quantiles, argmax_samples } => {
                positive(grid_size, "grid_size")?;
                positive(fantasy_quantiles, "fantasy_quantiles")?;
                positive(argmax_samples, "argmax_samples")
            }
        }
    }

    /// Stochastic-ascent configuration for KG; fields KG does not set come from `base`.
    pub fn kg_ascent(&self, base: &AscentConfig) -> Option<AscentConfig> {
        match *self {
            Self::Kg { restarts, iterations, step_constant, eval_replications, .. } => Some(AscentConfig {
                restarts,
                iterations,
                step_constant,
                eval_replications,
                ..base.clone()
            }),
            _ => None,
        }
    }
}
