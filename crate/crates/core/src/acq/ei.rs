use super::normal::{cdf, pdf};
use super::{observed_index, observed_moments};
use crate::acqopt::{multistart_deterministic, AscentConfig, MaximizerResult};
use crate::error::Result;
use crate::gp::{Bounds, PosteriorState};
use crate::rng::Rng;

/// Standard deviations at or below this multiple of `sqrt(amplitude)` are
/// treated as zero by expected improvement.
pub const SIGMA_FLOOR: f64 = 1e-10;

/// `E[(Delta + sigma Z)^+]` for `Z ~ N(0, 1)`:
/// `[Delta]^+ + sigma phi(Delta/sigma) - |Delta| Phi(-|Delta|/sigma)`.
pub fn ei_closed_form(delta: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return delta.max(0.0);
    }
    let z = delta / sigma;
    let v = delta.max(0.0) + sigma * pdf(z) - delta.abs() * cdf(-delta.abs() / sigma);
    v.max(0.0)
}

/// Expected improvement over `f_star` at `x` and its gradient in `x`.
/// The value is never negative.
pub fn expected_improvement(state: &PosteriorState, x: &[f64], f_star: f64) -> (f64, Vec<f64>) {
    let mut m = state.moments_with_grad(x);
    if let Some(i) = observed_index(state, x) {
        (m.mean, m.variance) = observed_moments(state, i);
    }
    let floor = SIGMA_FLOOR * state.hypers().kernel.amplitude.sqrt();
    let var = m.variance.max(0.0);
    let sigma = var.sqrt();
    let delta = m.mean - f_star;
    if sigma <= floor {
        let grad = if delta > 0.0 { m.mean_grad } else { vec![0.0; x.len()] };
        return (delta.max(0.0), grad);
    }
    let z = delta / sigma;
    let value = ei_closed_form(delta, sigma);
    let (phi, big_phi) = (pdf(z), cdf(z));
    let grad = m
        .mean_grad
        .iter()
        .zip(&m.variance_grad)
        .map(|(gm, gv)| gm * big_phi + phi * gv / (2.0 * sigma))
        .collect();
    (value, grad)
}

/// Maximizes EI over `bounds` from `R` uniform starts plus the best observed point.
pub fn maximize_ei(
    state: &PosteriorState,
    f_star: f64,
    bounds: &Bounds,
    config: &AscentConfig,
    rng: &mut Rng,
) -> Result<MaximizerResult> {
    let anchors: Vec<Vec<f64>> =
        state.data().best().map(|(i, _)| vec![state.data().points()[i].clone()]).unwrap_or_default();
    multistart_deterministic(|x| expected_improvement(state, x, f_star), bounds, config, &anchors, rng)
}
