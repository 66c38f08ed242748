//! The sequential optimization loop: initial design, hyperparameter refits,
//! suggest / ingest / recommend, and the per-evaluation trace.

mod design;
mod optimizer;

use serde::{Deserialize, Serialize};

use crate::acq::AcquisitionSpec;
use crate::acqopt::AscentConfig;
use crate::error::{Error, Result};
use crate::gp::{BasisFunction, Bounds, HyperPrior, Hyperparameters, KernelFamily, KernelSpec, MeanSpec, ObservationSet};

pub use design::{initial_design, DesignMethod};
pub use optimizer::{run_loop, try_run_loop, NoiseSimulator, Optimizer, Phase, Recommendation, Suggestion};

/// Observation noise treatment of the surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum NoiseModel {
    Fixed { variance: f64 },
    /// Noise variance fitted (or sampled) with the other hyperparameters.
    Estimate,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::Fixed { variance: 0.0 }
    }
}

fn default_kernel() -> KernelFamily {
    KernelFamily::Matern52
}

/// Surrogate structure used to build a starting point for fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default = "default_kernel")]
    pub kernel: KernelFamily,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub basis: Vec<BasisFunction>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self { kernel: default_kernel(), noise: NoiseModel::default(), basis: Vec::new() }
    }
}

impl ModelSpec {
    pub fn estimates_noise(&self) -> bool {
        matches!(self.noise, NoiseModel::Estimate)
    }

    /// Data-scaled starting hyperparameters: amplitude at the sample variance,
    /// lengthscales at a quarter of the box width, constant mean at the
    /// sample mean.
    pub fn template(&self, data: &ObservationSet, bounds: &Bounds) -> Result<Hyperparameters> {
        let ys = data.values();
        let n = ys.len();
        let mean = if n == 0 { 0.0 } else { ys.iter().sum::<f64>() / n as f64 };
        let var = if n < 2 {
            1.0
        } else {
            let v = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64;
            v.max(1e-8 * (1.0 + mean * mean))
        };
        let inv_sq: Vec<f64> = (0..bounds.dim()).map(|i| (0.25 * bounds.width(i)).powi(-2)).collect();
        let noise = match self.noise {
            NoiseModel::Fixed { variance } => variance,
            NoiseModel::Estimate => 1e-3 * var,
        };
        Hyperparameters::new(
            KernelSpec::new(self.kernel, var, inv_sq)?,
            MeanSpec::with_basis(mean, vec![0.0; self.basis.len()], self.basis.clone())?,
            noise,
        )
    }
}

fn default_fb_samples() -> usize {
    10
}
fn default_burn_in() -> usize {
    50
}

/// How hyperparameters are chosen at each refit.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum HyperMode {
    Fixed {
        hypers: Hyperparameters,
    },
    #[default]
    Mle,
    Map {
        prior: HyperPrior,
    },
    /// Slice-sampled hyperparameters; acquisitions are averaged over the samples.
    FullyBayesian {
        prior: HyperPrior,
        #[serde(default = "default_fb_samples")]
        samples: usize,
        #[serde(default = "default_burn_in")]
        burn_in: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecommendMode {
    /// The evaluated point with the largest observed value; earliest wins ties.
    #[default]
    BestObserved,
    /// The maximizer of the posterior mean over the box.
    MaxPosteriorMean,
}

fn default_refit_every() -> usize {
    1
}
fn default_fit_restarts() -> usize {
    3
}

/// Everything that determines a run of the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub bounds: Bounds,
    /// Initial design size.
    pub n0: usize,
    /// Total evaluation budget, including the design.
    pub budget: usize,
    #[serde(default)]
    pub design: DesignMethod,
    #[serde(default)]
    pub acquisition: AcquisitionSpec,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub hyper_mode: HyperMode,
    #[serde(default = "default_refit_every")]
    pub refit_every: usize,
    #[serde(default)]
    pub recommend_mode: RecommendMode,
    #[serde(default)]
    pub seed: u64,
    /// Restarts and step controls for the deterministic maximizers.
    #[serde(default)]
    pub optimizer: AscentConfig,
    #[serde(default = "default_fit_restarts")]
    pub fit_restarts: usize,
    /// Reject observations that do not match a pending suggestion.
    #[serde(default)]
    pub strict_pairing: bool,
    /// Record wall-clock milliseconds in the trace (otherwise 0, keeping traces reproducible).
    #[serde(default)]
    pub record_timing: bool,
}

impl LoopConfig {
    pub fn new(bounds: Bounds, n0: usize, budget: usize) -> Self {
        Self {
            bounds,
            n0,
            budget,
            design: DesignMethod::default(),
            acquisition: AcquisitionSpec::default(),
            model: ModelSpec::default(),
            hyper_mode: HyperMode::default(),
            refit_every: default_refit_every(),
            recommend_mode: RecommendMode::default(),
            seed: 0,
            optimizer: AscentConfig::default(),
            fit_restarts: default_fit_restarts(),
            strict_pairing: false,
            record_timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 || self.n0 > self.budget {
            return Err(Error::invalid(format!(
                "need 1 <= n0 <= budget, got n0 = {} and budget = {}",
                self.n0, self.budget
            )));
        }
        if self.refit_every == 0 {
            return Err(Error::invalid("refit_every must be >= 1"));
        }
        if self.fit_restarts == 0 {
            return Err(Error::invalid("fit_restarts must be >= 1"));
        }
        self.acquisition.validate()?;
        self.optimizer.validate()?;
        if let NoiseModel::Fixed { variance } = self.model.noise {
            if !(variance >= 0.0) || !variance.is_finite() {
                return Err(Error::invalid("fixed noise variance must be finite and >= 0"));
            }
        }
        let d = self.bounds.dim();
        let template = self.model.template(&ObservationSet::new(d), &self.bounds)?;
        match &self.hyper_mode {
            HyperMode::Fixed { hypers } => {
                hypers.validate()?;
                if hypers.dim() != d {
                    return Err(Error::invalid("fixed hyperparameters do not match the bounds dimension"));
                }
            }
            HyperMode::Mle => {}
            HyperMode::Map { prior } => prior.validate(template.layout())?,
            HyperMode::FullyBayesian { prior, samples, .. } => {
                prior.validate(template.layout())?;
                if *samples == 0 {
                    return Err(Error::invalid("fully-Bayesian mode needs at least one sample"));
                }
            }
        }
        Ok(())
    }
}

/// State after one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 1-based evaluation index.
    pub n: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub best_observed: f64,
    /// Maximum of the posterior mean over the box after this evaluation.
    pub best_posterior_mean: f64,
    /// Acquisition value when the point was suggested; absent for design
    /// points and off-policy observations.
    pub acq_value: Option<f64>,
    pub elapsed_ms: u64,
    /// Hyperparameters after this evaluation (the last sample in fully-Bayesian mode).
    pub hypers: Hyperparameters,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json_defaults() {
        let c: LoopConfig = serde_json::from_str(
            r#"{"bounds":{"lower":[0.0],"upper":[4.0]},"n0":3,"budget":10}"#,
        )
        .unwrap();
        assert_eq!(c, LoopConfig::new(Bounds::new(vec![0.0], vec![4.0]).unwrap(), 3, 10));
        c.validate().unwrap();
        let mut bad = c.clone();
        bad.n0 = 11;
        assert!(bad.validate().is_err());
        bad.n0 = 3;
        bad.refit_every = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn template_scales_with_data() {
        let b = Bounds::new(vec![0.0, 0.0], vec![4.0, 8.0]).unwrap();
        let data = ObservationSet::from_parts(2, vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![1.0, 3.0]).unwrap();
        let h = ModelSpec::default().template(&data, &b).unwrap();
        assert_eq!(h.kernel.amplitude, 1.0);
        assert_eq!(h.kernel.inv_sq_lengthscales, vec![1.0, 0.25]);
        assert_eq!(h.mean.constant, 2.0);
        assert_eq!(h.noise_variance, 0.0);
    }
}
