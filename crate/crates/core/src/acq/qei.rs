use serde::{Deserialize, Serialize};

use super::{default_ei_incumbent, maximize_ei, McEstimate};
use crate::acqopt::AscentConfig;
use crate::error::{Error, Result};
use crate::gp::{draw, psd_factor, Bounds, PosteriorState, VARIANCE_CLAMP};
use crate::rng::Rng;

/// Fabricated value assigned to pending points by Constant Liar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LieValue {
    Min,
    #[default]
    Mean,
    Max,
}

impl LieValue {
    pub fn value(self, ys: &[f64]) -> Option<f64> {
        if ys.is_empty() {
            return None;
        }
        Some(match self {
            Self::Min => ys.iter().copied().fold(f64::INFINITY, f64::min),
            Self::Mean => ys.iter().sum::<f64>() / ys.len() as f64,
            Self::Max => ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Monte-Carlo estimate of `E[(max_i f(x_i) - f_star)^+]` from joint
/// posterior draws at the batch `xs`.
pub fn parallel_ei(
    state: &PosteriorState,
    xs: &[Vec<f64>],
    f_star: f64,
    j: usize,
    rng: &mut Rng,
) -> Result<McEstimate> {
    if xs.is_empty() {
        return Err(Error::invalid("parallel EI needs at least one point"));
    }
    if j < 2 {
        return Err(Error::invalid("parallel EI needs J >= 2"));
    }
    let joint = state.predict_joint(xs)?;
    let factor = psd_factor(&joint.covariance, VARIANCE_CLAMP * state.hypers().kernel.amplitude);
    let samples: Vec<f64> = (0..j)
        .map(|_| {
            let f = draw(&joint.means, &factor, rng);
            let best = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (best - f_star).max(0.0)
        })
        .collect();
    Ok(McEstimate::from_samples(&samples, 0))
}

/// Greedy batch of `q` points: maximize single-point EI, pretend the chosen
/// point returned the lie value, refit with the same hyperparameters, repeat.
pub fn constant_liar_batch(
    state: &PosteriorState,
    q: usize,
    lie: LieValue,
    bounds: &Bounds,
    config: &AscentConfig,
    rng: &mut Rng,
) -> Result<Vec<Vec<f64>>> {
    if q == 0 {
        return Err(Error::invalid("batch size must be >= 1"));
    }
    let lie_value = lie
        .value(state.data().values())
        .ok_or_else(|| Error::invalid("Constant Liar needs at least one observation"))?;
    let mut current = state.clone();
    let mut batch = Vec::with_capacity(q);
    for k in 0..q {
        let f_star = default_ei_incumbent(&current);
        let best = maximize_ei(&current, f_star, bounds, config, rng)?;
        if k + 1 < q {
            current = current.with_observation(best.argmax.clone(), lie_value)?;
        }
        batch.push(best.argmax);
    }
    Ok(batch)
}
