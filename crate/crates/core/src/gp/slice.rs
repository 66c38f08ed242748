//! Fully-Bayesian treatment of hyperparameters: coordinate-wise univariate
//! slice sampling (stepping out, then shrinkage) of the hyperparameter
//! posterior, and the equal-weight mixture predictive over the draws.

use rand::Rng as _;

use super::hyper::{HyperPrior, Hyperparameters, ParamPrior};
use super::posterior::{fit_posterior, Predictive};
use super::types::ObservationSet;
use crate::error::{Error, Result};
use crate::rng::Rng;

const MAX_STEP_OUT: usize = 50;
const MAX_SHRINK: usize = 200;

/// Log posterior density over the unconstrained coordinates: log likelihood,
/// log prior in natural units, and `log |dv/du| = u` for every free positive slot.
struct Target<'a> {
    data: &'a ObservationSet,
    template: &'a Hyperparameters,
    prior: &'a HyperPrior,
    free: Vec<usize>,
}

impl Target<'_> {
    fn log_density(&self, u: &[f64]) -> f64 {
        let layout = self.template.layout();
        let h = self.template.with_unconstrained(u);
        let mut lp = 0.0;
        for &i in &self.free {
            let v = if layout.is_positive(i) { u[i].exp() } else { u[i] };
            lp += self.prior.priors[i].log_density(v);
            if layout.is_positive(i) {
                lp += u[i];
            }
        }
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        if self.data.is_empty() {
            return lp;
        }
        match fit_posterior(self.data, &h) {
            Ok(state) => lp + state.log_marginal_likelihood(),
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

fn initial_width(prior: &ParamPrior, positive: bool) -> f64 {
    let w = match *prior {
        ParamPrior::Normal { mean, sd } => {
            if positive {
                (sd / mean.abs().max(sd)).max(1e-3)
            } else {
                sd
            }
        }
        ParamPrior::LogNormal { sigma, .. } => {
            if positive {
                sigma
            } else {
                1.0
            }
        }
        ParamPrior::Uniform { .. } => match prior.unconstrained_support(positive) {
            Some((a, b)) if a.is_finite() => 0.5 * (b - a),
            _ => 1.0,
        },
        ParamPrior::Fixed | ParamPrior::Flat => 1.0,
    };
    w.max(1e-12)
}

/// A finite starting coordinate inside the prior support.
fn initial_value(prior: &ParamPrior, positive: bool, template_u: f64) -> f64 {
    let in_support = match prior.unconstrained_support(positive) {
        Some((a, b)) => template_u >= a && template_u <= b,
        None => true,
    };
    if template_u.is_finite() && in_support {
        return template_u;
    }
    let natural = match *prior {
        ParamPrior::Normal { mean, sd } => {
            if positive {
                mean.max(sd)
            } else {
                mean
            }
        }
        ParamPrior::LogNormal { mu, .. } => mu.exp(),
        ParamPrior::Uniform { lo, hi } => 0.5 * (lo + hi),
        ParamPrior::Fixed | ParamPrior::Flat => 1.0,
    };
    if positive {
        natural.ln()
    } else {
        natural
    }
}

fn slice_update(
    target: &Target,
    u: &mut [f64],
    slot: usize,
    width: f64,
    current: f64,
    rng: &mut Rng,
) -> f64 {
    let x0 = u[slot];
    let level = current + rng.random::<f64>().ln();
    let eval = |x: f64, u: &mut [f64]| {
        u[slot] = x;
        target.log_density(u)
    };

    let mut left = x0 - width * rng.random::<f64>();
    let mut right = left + width;
    let mut j = (MAX_STEP_OUT as f64 * rng.random::<f64>()).floor() as usize;
    let mut k = MAX_STEP_OUT - 1 - j;
    while j > 0 && eval(left, u) > level {
        left -= width;
        j -= 1;
    }
    while k > 0 && eval(right, u) > level {
        right += width;
        k -= 1;
    }

    for _ in 0..MAX_SHRINK {
        let x1 = left + (right - left) * rng.random::<f64>();
        let f1 = eval(x1, u);
        if f1 > level {
            return f1;
        }
        if x1 < x0 {
            left = x1;
        } else {
            right = x1;
        }
    }
    u[slot] = x0;
    current
}

/// Draws `samples` hyperparameter vectors from the posterior given `data`
/// (the prior alone when `data` is empty) after `burn_in` discarded sweeps.
/// Slots whose prior is [`ParamPrior::Fixed`] keep their template value.
pub fn slice_sample_hyperparameters(
    data: &ObservationSet,
    template: &Hyperparameters,
    prior: &HyperPrior,
    samples: usize,
    burn_in: usize,
    rng: &mut Rng,
) -> Result<Vec<Hyperparameters>> {
    if samples == 0 {
        return Err(Error::invalid("slice sampling needs at least one sample"));
    }
    template.validate()?;
    let layout = template.layout();
    prior.validate(layout)?;
    if !data.is_empty() && data.dim() != template.dim() {
        return Err(Error::invalid("data dimension does not match the hyperparameters"));
    }
    let free: Vec<usize> = (0..layout.len())
        .filter(|&i| !matches!(prior.priors[i], ParamPrior::Fixed))
        .collect();
    if let Some(&i) = free.iter().find(|&&i| !prior.priors[i].is_proper()) {
        return Err(Error::invalid(format!(
            "{}: slice sampling needs a proper prior on every sampled parameter",
            layout.name(i)
        )));
    }

    let mut u = template.to_unconstrained();
    for &i in &free {
        u[i] = initial_value(&prior.priors[i], layout.is_positive(i), u[i]);
    }
    let widths: Vec<f64> = free
        .iter()
        .map(|&i| initial_width(&prior.priors[i], layout.is_positive(i)))
        .collect();
    let target = Target { data, template, prior, free };
    let mut current = target.log_density(&u);
    if !current.is_finite() {
        return Err(Error::numerical("slice sampler start point has zero posterior density"));
    }

    let mut out = Vec::with_capacity(samples);
    for sweep in 0..burn_in + samples {
        for (k, &slot) in target.free.iter().enumerate() {
            current = slice_update(&target, &mut u, slot, widths[k], current, rng);
        }
        if sweep >= burn_in {
            out.push(template.with_unconstrained(&u));
        }
    }
    Ok(out)
}

/// Equal-weight mixture of per-sample predictives.
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePredictive {
    pub components: Vec<Predictive>,
}

impl MixturePredictive {
    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.mean).sum::<f64>() / self.components.len() as f64
    }

    /// Total variance: mean of component variances plus variance of component means.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let j = self.components.len() as f64;
        self.components
            .iter()
            .map(|c| c.variance + (c.mean - m).powi(2))
            .sum::<f64>()
            / j
    }
}

pub fn predict_marginalized(
    data: &ObservationSet,
    samples: &[Hyperparameters],
    x: &[f64],
) -> Result<MixturePredictive> {
    if samples.is_empty() {
        return Err(Error::invalid("marginalized prediction needs at least one sample"));
    }
    let components = samples
        .iter()
        .map(|h| fit_posterior(data, h)?.predict(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(MixturePredictive { components })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::kernel::KernelFamily;
    use crate::rng::seeded;

    fn template() -> Hyperparameters {
        Hyperparameters::isotropic(KernelFamily::PowerExponential, 1.0, 1.0, 1, 0.0, 0.0).unwrap()
    }

    fn only_constant(prior: ParamPrior) -> HyperPrior {
        let t = template();
        let mut p = HyperPrior { priors: vec![ParamPrior::Fixed; t.layout().len()] };
        p.priors[t.layout().constant()] = prior;
        p
    }

    #[test]
    fn flat_prior_is_rejected() {
        let data = ObservationSet::new(1);
        let p = only_constant(ParamPrior::Flat);
        assert!(slice_sample_hyperparameters(&data, &template(), &p, 10, 0, &mut seeded(0)).is_err());
    }

    #[test]
    fn chain_is_seed_deterministic() {
        let data = ObservationSet::from_parts(1, vec![vec![0.0], vec![1.0]], vec![0.5, -0.2]).unwrap();
        let t = template();
        let mut p = HyperPrior { priors: vec![ParamPrior::Fixed; t.layout().len()] };
        p.priors[0] = ParamPrior::LogNormal { mu: 0.0, sigma: 1.0 };
        p.priors[t.layout().constant()] = ParamPrior::Normal { mean: 0.0, sd: 1.0 };
        let a = slice_sample_hyperparameters(&data, &t, &p, 50, 10, &mut seeded(11)).unwrap();
        let b = slice_sample_hyperparameters(&data, &t, &p, 50, 10, &mut seeded(11)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
    }

    #[test]
    fn singleton_mixture_matches_predict() {
        let data = ObservationSet::from_parts(1, vec![vec![0.0], vec![1.0]], vec![0.5, -0.2]).unwrap();
        let h = template();
        let mix = predict_marginalized(&data, &[h.clone()], &[0.4]).unwrap();
        let p = fit_posterior(&data, &h).unwrap().predict(&[0.4]).unwrap();
        assert_eq!(mix.components, vec![p]);
        let twice = predict_marginalized(&data, &[h.clone(), h], &[0.4]).unwrap();
        assert_eq!(twice.mean(), p.mean);
        assert!((twice.variance() - p.variance).abs() < 1e-15);
    }
}
