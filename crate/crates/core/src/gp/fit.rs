//! Point estimates of hyperparameters by multistart ascent of the
//! (penalized) log marginal likelihood.

use serde::{Deserialize, Serialize};

use super::hyper::{HyperPrior, Hyperparameters};
use super::mean::BasisFunction;
use super::likelihood::log_marginal_likelihood_grad;
use super::types::{Bounds, ObservationSet};
use crate::acqopt::{local_gradient_ascent, AscentConfig};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum FitMode {
    Mle,
    Map { prior: HyperPrior },
}

/// Search box per parameter slot in unconstrained coordinates.
/// `None` holds the slot at the template value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperBounds {
    pub slots: Vec<Option<(f64, f64)>>,
}

impl HyperBounds {
    /// Data-scaled defaults: amplitude within four decades around the sample
    /// variance, lengthscales from 1% to 10x the box width, the constant mean
    /// within the data range padded by its width, noise (when estimated) from
    /// `1e-8` to `1` times the sample variance, and each basis coefficient
    /// within four data ranges divided by the basis function's largest
    /// magnitude on the box.
    pub fn default_for(
        data: &ObservationSet,
        domain: &Bounds,
        template: &Hyperparameters,
        estimate_noise: bool,
    ) -> Self {
        let layout = template.layout();
        let ys = data.values();
        let n = ys.len().max(1) as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
        let var = var.max(1e-10 * (1.0 + mean * mean));
        let (lo, hi) = ys
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(*y), b.max(*y)));
        let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (-1.0, 1.0) };
        let range = (hi - lo).max(var.sqrt()).max(1e-8);

        let mut slots = vec![None; layout.len()];
        slots[layout.amplitude()] = Some(((1e-2 * var).ln(), (1e2 * var).ln()));
        for i in 0..layout.dim {
            let w = domain.width(i);
            slots[layout.lengthscale(i)] = Some(((10.0 * w).powi(-2).ln(), (0.01 * w).powi(-2).ln()));
        }
        if estimate_noise {
            slots[layout.noise()] = Some(((1e-8 * var).ln(), var.ln()));
        }
        slots[layout.constant()] = Some((lo - range, hi + range));
        for (k, psi) in template.mean.basis.iter().enumerate() {
            let corner = |i: usize| domain.lower()[i].abs().max(domain.upper()[i].abs());
            let scale = match *psi {
                BasisFunction::Coordinate(i) => corner(i),
                BasisFunction::Square(i) => corner(i).powi(2),
                BasisFunction::Product(i, j) => corner(i) * corner(j),
            }
            .max(1e-12);
            let c = 4.0 * range / scale;
            slots[layout.coefficient(k)] = Some((-c, c));
        }
        Self { slots }
    }

    pub fn validate(&self, template: &Hyperparameters) -> Result<()> {
        let layout = template.layout();
        if self.slots.len() != layout.len() {
            return Err(Error::invalid(format!(
                "hyperparameter bounds have {} slots, layout has {}",
                self.slots.len(),
                layout.len()
            )));
        }
        for (i, s) in self.slots.iter().enumerate() {
            if let Some((lo, hi)) = s {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::invalid(format!(
                        "{}: search interval must be finite with lo < hi",
                        layout.name(i)
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HyperFit {
    pub hypers: Hyperparameters,
    /// Objective (log likelihood, plus log prior under MAP) at `hypers`.
    pub objective: f64,
    /// `(objective at start, objective at end)` per restart; `NaN` marks a failure.
    pub restarts: Vec<(f64, f64)>,
}

/// Log likelihood, plus the log prior density under MAP.
pub fn fit_objective(data: &ObservationSet, hypers: &Hyperparameters, mode: &FitMode) -> Result<f64> {
    let (lml, _) = log_marginal_likelihood_grad(data, hypers)?;
    Ok(match mode {
        FitMode::Mle => lml,
        FitMode::Map { prior } => lml + prior.log_density(hypers),
    })
}

/// Maximizes the marginal likelihood (MLE) or likelihood times prior (MAP)
/// over the free slots of `bounds`, from the template plus `restarts - 1`
/// uniform starts in the search box.
pub fn fit_hyperparameters(
    data: &ObservationSet,
    template: &Hyperparameters,
    mode: &FitMode,
    bounds: &HyperBounds,
    restarts: usize,
    rng: &mut Rng,
) -> Result<HyperFit> {
    if data.len() < 2 {
        return Err(Error::invalid("hyperparameter fitting needs at least two observations"));
    }
    if restarts == 0 {
        return Err(Error::invalid("restarts must be >= 1"));
    }
    template.validate()?;
    bounds.validate(template)?;
    let layout = template.layout();
    let prior = match mode {
        FitMode::Mle => None,
        FitMode::Map { prior } => {
            prior.validate(layout)?;
            Some(prior)
        }
    };

    let base = template.to_unconstrained();
    let mut free = Vec::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for (i, slot) in bounds.slots.iter().enumerate() {
        let Some((mut lo, mut hi)) = *slot else { continue };
        if let Some(p) = prior {
            if let Some((a, b)) = p.priors[i].unconstrained_support(layout.is_positive(i)) {
                lo = lo.max(a);
                hi = hi.min(b);
            }
        }
        if !(lo < hi) {
            return Err(Error::invalid(format!(
                "{}: search interval does not meet the prior support",
                layout.name(i)
            )));
        }
        free.push(i);
        lower.push(lo);
        upper.push(hi);
    }
    if free.is_empty() {
        let objective = fit_objective(data, template, mode)?;
        return Ok(HyperFit { hypers: template.clone(), objective, restarts: vec![(objective, objective)] });
    }
    let search = Bounds::new(lower, upper)?;

    let assemble = |z: &[f64]| {
        let mut u = base.clone();
        for (k, &i) in free.iter().enumerate() {
            u[i] = z[k];
        }
        template.with_unconstrained(&u)
    };
    let objective = |z: &[f64]| -> (f64, Vec<f64>) {
        let h = assemble(z);
        match log_marginal_likelihood_grad(data, &h) {
            Ok((lml, g)) => {
                let mut value = lml;
                let mut grad: Vec<f64> = free.iter().map(|&i| g[i]).collect();
                if let Some(p) = prior {
                    value += p.log_density(&h);
                    for (k, &i) in free.iter().enumerate() {
                        grad[k] += p.priors[i].log_density_slope(z[k], layout.is_positive(i));
                    }
                }
                (value, grad)
            }
            Err(_) => (f64::NAN, vec![f64::NAN; free.len()]),
        }
    };

    let config = AscentConfig { iterations: 200, convergence_tol: 1e-7, ..AscentConfig::default() };
    let mut starts = Vec::with_capacity(restarts);
    // a zero template noise (-inf on the log scale) clamps to the lower end
    starts.push(search.project(&free.iter().map(|&i| base[i]).collect::<Vec<_>>()));
    for _ in 1..restarts {
        starts.push(search.sample_uniform(rng));
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut summary = Vec::with_capacity(restarts);
    for s in &starts {
        let start_value = objective(s).0;
        match local_gradient_ascent(objective, s, &search, &config) {
            Ok(res) => {
                summary.push((start_value, res.value));
                if best.as_ref().is_none_or(|(_, v)| res.value > *v) {
                    best = Some((res.x, res.value));
                }
            }
            Err(_) => summary.push((start_value, f64::NAN)),
        }
    }
    let (z, value) = best.ok_or_else(|| {
        Error::numerical("hyperparameter fit failed: every restart hit a non-finite objective")
    })?;
    Ok(HyperFit { hypers: assemble(&z), objective: value, restarts: summary })
}
