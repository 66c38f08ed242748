//! Hyperparameters, their unconstrained coordinates, and priors over them.
//!
//! Optimizers and samplers work on a flat vector laid out as
//! `[log amplitude, log alpha_1..d, log noise, constant, beta_1..p]`.
//! Positive parameters live on the log scale; mean parameters are raw.

use serde::{Deserialize, Serialize};

use super::kernel::{KernelFamily, KernelSpec};
use super::mean::MeanSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub kernel: KernelSpec,
    pub mean: MeanSpec,
    pub noise_variance: f64,
}

impl Hyperparameters {
    pub fn new(kernel: KernelSpec, mean: MeanSpec, noise_variance: f64) -> Result<Self> {
        let h = Self { kernel, mean, noise_variance };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.mean.validate(self.kernel.dim())?;
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::invalid(format!(
                "noise variance must be >= 0, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout { dim: self.dim(), basis: self.mean.basis.len() }
    }

    /// Flat unconstrained coordinates. A zero noise variance maps to `-inf`.
    pub fn to_unconstrained(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.layout().len());
        v.push(self.kernel.amplitude.ln());
        v.extend(self.kernel.inv_sq_lengthscales.iter().map(|a| a.ln()));
        v.push(self.noise_variance.ln());
        v.push(self.mean.constant);
        v.extend(self.mean.basis_coefficients.iter().copied());
        v
    }

    /// Copy of `self` with every parameter replaced from `v`.
    pub fn with_unconstrained(&self, v: &[f64]) -> Hyperparameters {
        let layout = self.layout();
        debug_assert_eq!(v.len(), layout.len());
        let d = layout.dim;
        let mut h = self.clone();
        h.kernel.amplitude = v[0].exp();
        for i in 0..d {
            h.kernel.inv_sq_lengthscales[i] = v[1 + i].exp();
        }
        h.noise_variance = v[layout.noise()].exp();
        h.mean.constant = v[layout.constant()];
        for k in 0..layout.basis {
            h.mean.basis_coefficients[k] = v[layout.constant() + 1 + k];
        }
        h
    }

    /// Parameters in their natural units, same order as the unconstrained layout.
    pub fn to_natural(&self) -> Vec<f64> {
        let layout = self.layout();
        let mut v = self.to_unconstrained();
        for (i, x) in v.iter_mut().enumerate() {
            if layout.is_positive(i) {
                *x = x.exp();
            }
        }
        v
    }

    /// Convenience constructor: constant mean, one shared inverse squared lengthscale.
    pub fn isotropic(
        family: KernelFamily,
        amplitude: f64,
        inv_sq_lengthscale: f64,
        dim: usize,
        mean: f64,
        noise_variance: f64,
    ) -> Result<Self> {
        Self::new(
            KernelSpec::new(family, amplitude, vec![inv_sq_lengthscale; dim])?,
            MeanSpec::constant(mean),
            noise_variance,
        )
    }
}

/// Index map for the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub dim: usize,
    pub basis: usize,
}

impl ParamLayout {
    pub fn len(&self) -> usize {
        self.dim + 3 + self.basis
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn amplitude(&self) -> usize {
        0
    }

    pub fn lengthscale(&self, i: usize) -> usize {
        1 + i
    }

    pub fn noise(&self) -> usize {
        self.dim + 1
    }

    pub fn constant(&self) -> usize {
        self.dim + 2
    }

    pub fn coefficient(&self, k: usize) -> usize {
        self.dim + 3 + k
    }

    /// Whether slot `i` is a positive parameter stored on the log scale.
    pub fn is_positive(&self, i: usize) -> bool {
        i <= self.noise()
    }

    pub fn name(&self, i: usize) -> String {
        match i {
            0 => "amplitude".into(),
            i if i <= self.dim => format!("inv_sq_lengthscale[{}]", i - 1),
            i if i == self.noise() => "noise_variance".into(),
            i if i == self.constant() => "mean_constant".into(),
            i => format!("mean_coefficient[{}]", i - self.dim - 3),
        }
    }
}

/// Prior on one hyperparameter, stated in its natural units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ParamPrior {
    /// Held at the template value; not estimated or sampled.
    Fixed,
    /// Constant density.
    Flat,
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
    LogNormal { mu: f64, sigma: f64 },
}

impl ParamPrior {
    fn validate(&self) -> Result<()> {
        match *self {
            ParamPrior::Uniform { lo, hi } if !(lo < hi) => {
                Err(Error::invalid(format!("uniform prior needs lo < hi, got [{lo}, {hi}]")))
            }
            ParamPrior::Normal { sd, .. } if !(sd > 0.0) => {
                Err(Error::invalid("normal prior needs sd > 0"))
            }
            ParamPrior::LogNormal { sigma, .. } if !(sigma > 0.0) => {
                Err(Error::invalid("log-normal prior needs sigma > 0"))
            }
            _ => Ok(()),
        }
    }

    pub fn is_proper(&self) -> bool {
        !matches!(self, ParamPrior::Flat)
    }

    /// Log density (up to a constant) at natural value `v`.
    pub fn log_density(&self, v: f64) -> f64 {
        match *self {
            ParamPrior::Fixed | ParamPrior::Flat => 0.0,
            ParamPrior::Uniform { lo, hi } => {
                if v >= lo && v <= hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            ParamPrior::Normal { mean, sd } => {
                let z = (v - mean) / sd;
                -0.5 * z * z - sd.ln()
            }
            ParamPrior::LogNormal { mu, sigma } => {
                if v <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let z = (v.ln() - mu) / sigma;
                -0.5 * z * z - sigma.ln() - v.ln()
            }
        }
    }

    /// Derivative of the log density with respect to the unconstrained
    /// coordinate `u`, where `v = exp(u)` for positive slots and `v = u` otherwise.
    pub fn log_density_slope(&self, u: f64, positive: bool) -> f64 {
        let v = if positive { u.exp() } else { u };
        let dv_du = if positive { v } else { 1.0 };
        match *self {
            ParamPrior::Fixed | ParamPrior::Flat | ParamPrior::Uniform { .. } => 0.0,
            ParamPrior::Normal { mean, sd } => -(v - mean) / (sd * sd) * dv_du,
            ParamPrior::LogNormal { mu, sigma } => {
                if v <= 0.0 {
                    return 0.0;
                }
                (-(v.ln() - mu) / (sigma * sigma) - 1.0) / v * dv_du
            }
        }
    }

    /// Support in unconstrained coordinates, if bounded.
    pub fn unconstrained_support(&self, positive: bool) -> Option<(f64, f64)> {
        match *self {
            ParamPrior::Uniform { lo, hi } => {
                if positive {
                    Some((if lo > 0.0 { lo.ln() } else { f64::NEG_INFINITY }, hi.ln()))
                } else {
                    Some((lo, hi))
                }
            }
            _ => None,
        }
    }
}

/// One prior per slot of the parameter layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperPrior {
    pub priors: Vec<ParamPrior>,
}

impl HyperPrior {
    /// Flat prior on every slot.
    pub fn flat(layout: ParamLayout) -> Self {
        Self { priors: vec![ParamPrior::Flat; layout.len()] }
    }

    pub fn validate(&self, layout: ParamLayout) -> Result<()> {
        if self.priors.len() != layout.len() {
            return Err(Error::invalid(format!(
                "hyperprior has {} entries, parameter layout has {}",
                self.priors.len(),
                layout.len()
            )));
        }
        for (i, p) in self.priors.iter().enumerate() {
            p.validate().map_err(|e| e.context(layout.name(i)))?;
            if layout.is_positive(i) {
                if let ParamPrior::Uniform { hi, .. } = p {
                    if *hi <= 0.0 {
                        return Err(Error::invalid(format!(
                            "{}: uniform prior on a positive parameter needs hi > 0",
                            layout.name(i)
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Sum of per-slot log densities in natural units (no change-of-variables term).
    pub fn log_density(&self, hypers: &Hyperparameters) -> f64 {
        let natural = hypers.to_natural();
        self.priors
            .iter()
            .zip(&natural)
            .map(|(p, v)| p.log_density(*v))
            .sum()
    }
}
