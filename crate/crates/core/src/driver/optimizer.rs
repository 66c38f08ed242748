use std::fmt::Display;
use std::time::Instant;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{initial_design, HyperMode, LoopConfig, RecommendMode, TraceRecord};
use crate::acq::{
    self, constant_liar_batch, default_ei_incumbent, entropy_search_scores, expected_improvement, kgcp,
    parallel_ei, tensor_grid, AcquisitionSpec, InnerDomain, KnowledgeGradient, LieValue, QeiMethod,
};
use crate::acqopt::{multistart_deterministic, multistart_sga, AscentConfig, MaximizerResult};
use crate::error::{Error, Result};
use crate::gp::{
    fit_hyperparameters, fit_posterior, slice_sample_hyperparameters, FitMode, HyperBounds, Hyperparameters,
    ObservationSet, PosteriorState,
};
use crate::rng::{self, Rng};

const DESIGN_TAG: u64 = 1;
const FIT_TAG: u64 = 2;
const SUGGEST_TAG: u64 = 3;
const INCUMBENT_TAG: u64 = 4;
const RECOMMEND_TAG: u64 = 5;
const NOISE_TAG: u64 = 6;
const BATCH_EVAL_TAG: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Design,
    Adaptive,
}

/// Points to evaluate next. Batch acquisitions return several points; the
/// rest return one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub points: Vec<Vec<f64>>,
    /// Absent during the initial design.
    pub acq_value: Option<f64>,
    pub acq_kind: String,
    pub phase: Phase,
    #[serde(default)]
    pub elapsed_ms: u64,
}

impl Suggestion {
    pub fn x(&self) -> &[f64] {
        &self.points[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub x: Vec<f64>,
    /// Observed value (best-observed mode) or posterior mean (max-posterior-mean mode).
    pub value: f64,
}

/// Ask-tell state of one optimization run. Every random choice is drawn from
/// a stream derived from the seed and the number of observations, so the
/// state can be saved and restored without any generator state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    config: LoopConfig,
    design: Vec<Vec<f64>>,
    #[serde(rename = "observations")]
    data: ObservationSet,
    trace: Vec<TraceRecord>,
    /// Current hyperparameters: one point estimate, or the slice samples.
    model: Vec<Hyperparameters>,
    /// Observation count at the last refit.
    last_refit: Option<usize>,
    #[serde(rename = "pending_suggestion")]
    pending: Option<Suggestion>,
}

impl Optimizer {
    pub fn new(config: LoopConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::substream(config.seed, DESIGN_TAG, 0);
        let design = initial_design(config.n0, &config.bounds, config.design, &mut rng)?;
        let model = match &config.hyper_mode {
            HyperMode::Fixed { hypers } => vec![hypers.clone()],
            _ => Vec::new(),
        };
        Ok(Self {
            data: ObservationSet::new(config.bounds.dim()),
            config,
            design,
            trace: Vec::new(),
            model,
            last_refit: None,
            pending: None,
        })
    }

    pub fn config(&self) -> &LoopConfig {
        &self.config
    }

    pub fn data(&self) -> &ObservationSet {
        &self.data
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn into_trace(self) -> Vec<TraceRecord> {
        self.trace
    }

    pub fn design(&self) -> &[Vec<f64>] {
        &self.design
    }

    pub fn pending(&self) -> Option<&Suggestion> {
        self.pending.as_ref()
    }

    /// Current hyperparameters (several in fully-Bayesian mode). Empty before
    /// the first observation unless they are fixed.
    pub fn hyperparameters(&self) -> &[Hyperparameters] {
        &self.model
    }

    pub fn is_complete(&self) -> bool {
        self.data.len() >= self.config.budget
    }

    pub fn best_observed(&self) -> Option<(Vec<f64>, f64)> {
        self.data.best().map(|(i, y)| (self.data.points()[i].clone(), y))
    }

    /// One posterior per hyperparameter sample.
    pub fn posteriors(&self) -> Result<Vec<PosteriorState>> {
        let model = if self.model.is_empty() {
            vec![self.config.model.template(&self.data, &self.config.bounds)?]
        } else {
            self.model.clone()
        };
        model
            .iter()
            .map(|h| if self.data.is_empty() { PosteriorState::prior(h.clone()) } else { fit_posterior(&self.data, h) })
            .collect()
    }

    /// The pending suggestion, or a fresh one (which becomes pending).
    pub fn suggest(&mut self) -> Result<Suggestion> {
        if let Some(p) = &self.pending {
            return Ok(p.clone());
        }
        let s = self.compute_suggestion()?;
        self.pending = Some(s.clone());
        Ok(s)
    }

    /// The suggestion for the current state, computed without touching the pending one.
    pub fn compute_suggestion(&self) -> Result<Suggestion> {
        let n = self.data.len();
        if n < self.config.n0 {
            return Ok(Suggestion {
                points: vec![self.design[n].clone()],
                acq_value: None,
                acq_kind: "initial-design".into(),
                phase: Phase::Design,
                elapsed_ms: 0,
            });
        }
        let start = Instant::now();
        let states = self.posteriors()?;
        let mut rng = rng::substream(self.config.seed, SUGGEST_TAG, n as u64);
        let mut s = self
            .acquire(&states, &mut rng)
            .map_err(|e| e.context(format!("suggestion after {n} evaluations")))?;
        let remaining = self.config.budget.saturating_sub(n).max(1);
        s.points.truncate(remaining);
        if self.config.record_timing {
            s.elapsed_ms = start.elapsed().as_millis() as u64;
        }
        Ok(s)
    }

    fn acquire(&self, states: &[PosteriorState], rng: &mut Rng) -> Result<Suggestion> {
        let bounds = &self.config.bounds;
        let opt = &self.config.optimizer;
        let spec = &self.config.acquisition;
        let adaptive = |points: Vec<Vec<f64>>, value: f64| Suggestion {
            points,
            acq_value: Some(value),
            acq_kind: spec.name().into(),
            phase: Phase::Adaptive,
            elapsed_ms: 0,
        };
        let anchors = self.best_observed().map(|(x, _)| vec![x]).unwrap_or_default();
        let j = states.len() as f64;
        let last = states.last().expect("at least one posterior");
        match *spec {
            AcquisitionSpec::Ei => {
                let f_stars: Vec<f64> = states.iter().map(default_ei_incumbent).collect();
                let r = multistart_deterministic(
                    |x| average(states.iter().zip(&f_stars).map(|(s, f)| expected_improvement(s, x, *f)), j),
                    bounds,
                    opt,
                    &anchors,
                    rng,
                )?;
                Ok(adaptive(vec![r.argmax], r.value))
            }
            AcquisitionSpec::Kgcp => {
                let r = multistart_deterministic(
                    |x| average(states.iter().map(|s| kgcp(s, x)), j),
                    bounds,
                    opt,
                    &anchors,
                    rng,
                )?;
                Ok(adaptive(vec![r.argmax], r.value))
            }
            AcquisitionSpec::Kg { eval_replications, gradient_replications, .. } => {
                let cfg = spec.kg_ascent(opt).expect("kg spec");
                let kgs = states
                    .iter()
                    .map(|s| KnowledgeGradient::new(s, InnerDomain::Box(bounds.clone()), opt, rng))
                    .collect::<Result<Vec<_>>>()?;
                let r = multistart_sga(
                    |x, r| {
                        let mut g = vec![0.0; x.len()];
                        for kg in &kgs {
                            let e = kg.gradient_estimate(x, gradient_replications, r)?;
                            for (gi, v) in g.iter_mut().zip(&e.gradient) {
                                *gi += v / j;
                            }
                        }
                        Ok(g)
                    },
                    |x, r| {
                        let mut v = 0.0;
                        for kg in &kgs {
                            v += kg.estimate(x, eval_replications, r)?.value / j;
                        }
                        Ok(v)
                    },
                    bounds,
                    &cfg,
                    rng,
                )?;
                Ok(adaptive(vec![r.argmax], r.value))
            }
            AcquisitionSpec::Qei { q, replications, method, lie } => {
                let f_star = default_ei_incumbent(last);
                let eval_seed = rng::next_seed(rng);
                let score = |batch: &[Vec<f64>]| -> Result<f64> {
                    let mut r = rng::substream(eval_seed, BATCH_EVAL_TAG, 0);
                    Ok(parallel_ei(last, batch, f_star, replications, &mut r)?.value)
                };
                let (batch, value) = match method {
                    QeiMethod::ConstantLiar => {
                        let batch = constant_liar_batch(last, q, lie, bounds, opt, rng)?;
                        let v = score(&batch)?;
                        (batch, v)
                    }
                    QeiMethod::JointMc => {
                        let mut candidates = Vec::new();
                        for l in [LieValue::Min, LieValue::Mean, LieValue::Max] {
                            candidates.push(constant_liar_batch(last, q, l, bounds, opt, rng)?);
                        }
                        for _ in 0..opt.restarts {
                            candidates.push((0..q).map(|_| bounds.sample_uniform(rng)).collect());
                        }
                        let mut best: Option<(Vec<Vec<f64>>, f64)> = None;
                        for c in candidates {
                            let v = score(&c)?;
                            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                                best = Some((c, v));
                            }
                        }
                        best.expect("at least one candidate batch")
                    }
                };
                Ok(adaptive(batch, value))
            }
            AcquisitionSpec::Es { grid_size, fantasy_quantiles, argmax_samples } => {
                let grid = tensor_grid(bounds, grid_size)?;
                let scores = entropy_search_scores(last, &grid, argmax_samples, fantasy_quantiles, rng)?;
                let mut best = 0;
                for (i, v) in scores.iter().enumerate() {
                    if *v > scores[best] {
                        best = i;
                    }
                }
                Ok(adaptive(vec![grid[best].clone()], scores[best]))
            }
        }
    }

    /// Appends an observation, refits per the policy and records the trace.
    pub fn ingest(&mut self, x: Vec<f64>, y: f64) -> Result<&TraceRecord> {
        let start = Instant::now();
        if x.len() != self.config.bounds.dim() {
            return Err(Error::invalid(format!(
                "point has dimension {}, campaign has {}",
                x.len(),
                self.config.bounds.dim()
            )));
        }
        self.config.bounds.check_contains(&x)?;
        if !y.is_finite() {
            return Err(Error::invalid(format!("observed value must be finite, got {y}")));
        }
        let matched = self.pending.as_ref().and_then(|p| p.points.iter().position(|q| *q == x));
        if self.config.strict_pairing && matched.is_none() {
            return Err(Error::Conflict("observation does not match a pending suggestion".into()));
        }

        let mut next = self.clone();
        let (acq_value, suggest_ms) = match (matched, &next.pending) {
            (Some(_), Some(p)) => (p.acq_value, p.elapsed_ms),
            _ => (None, 0),
        };
        next.pending = match (matched, next.pending.take()) {
            (Some(i), Some(mut p)) => {
                p.points.remove(i);
                (!p.points.is_empty()).then_some(p)
            }
            _ => None,
        };
        next.data.push(x.clone(), y)?;
        next.refit()?;

        let n = next.data.len();
        let states = next.posteriors()?;
        let mut rng = rng::substream(next.config.seed, INCUMBENT_TAG, n as u64);
        let incumbent = mixture_mean_max(&states, &next.config.bounds, &next.config.optimizer, &mut rng)?;
        let elapsed_ms =
            if next.config.record_timing { suggest_ms + start.elapsed().as_millis() as u64 } else { 0 };
        next.trace.push(TraceRecord {
            n,
            x,
            y,
            best_observed: next.data.best().map(|(_, v)| v).expect("nonempty"),
            best_posterior_mean: incumbent.value,
            acq_value,
            elapsed_ms,
            hypers: next.model.last().cloned().unwrap_or(states[0].hypers().clone()),
        });
        *self = next;
        Ok(self.trace.last().expect("just pushed"))
    }

    fn refit(&mut self) -> Result<()> {
        let n = self.data.len();
        if matches!(self.config.hyper_mode, HyperMode::Fixed { .. }) {
            return Ok(());
        }
        if let Some(last) = self.last_refit {
            if n - last < self.config.refit_every {
                return Ok(());
            }
        }
        let mut rng = rng::substream(self.config.seed, FIT_TAG, n as u64);
        let fresh = self.config.model.template(&self.data, &self.config.bounds)?;
        let template = match self.model.last() {
            Some(prev) => warm_start(prev, &fresh),
            None => fresh,
        };
        let estimate_noise = self.config.model.estimates_noise();
        let hb = HyperBounds::default_for(&self.data, &self.config.bounds, &template, estimate_noise);
        let restarts = self.config.fit_restarts;
        self.model = match &self.config.hyper_mode {
            HyperMode::Fixed { .. } => unreachable!(),
            HyperMode::Mle | HyperMode::Map { .. } if n < 2 => vec![template],
            HyperMode::Mle => {
                vec![fit_hyperparameters(&self.data, &template, &FitMode::Mle, &hb, restarts, &mut rng)?.hypers]
            }
            HyperMode::Map { prior } => {
                let mode = FitMode::Map { prior: prior.clone() };
                vec![fit_hyperparameters(&self.data, &template, &mode, &hb, restarts, &mut rng)?.hypers]
            }
            HyperMode::FullyBayesian { prior, samples, burn_in } => {
                slice_sample_hyperparameters(&self.data, &template, prior, *samples, *burn_in, &mut rng)?
            }
        };
        self.last_refit = Some(n);
        Ok(())
    }

    /// Recommendation under the configured mode.
    pub fn recommend(&self) -> Result<Recommendation> {
        self.recommend_with(self.config.recommend_mode)
    }

    pub fn recommend_with(&self, mode: RecommendMode) -> Result<Recommendation> {
        let (x, y) = self.best_observed().ok_or_else(|| Error::invalid("no observations to recommend from"))?;
        match mode {
            RecommendMode::BestObserved => Ok(Recommendation { x, value: y }),
            RecommendMode::MaxPosteriorMean => {
                let states = self.posteriors()?;
                let mut rng = rng::substream(self.config.seed, RECOMMEND_TAG, self.data.len() as u64);
                let r = mixture_mean_max(&states, &self.config.bounds, &self.config.optimizer, &mut rng)?;
                Ok(Recommendation { x: r.argmax, value: r.value })
            }
        }
    }
}

/// Previous fit with the fresh template's data-scaled mean constant when the
/// previous one is outside the data range.
fn warm_start(prev: &Hyperparameters, fresh: &Hyperparameters) -> Hyperparameters {
    let mut h = prev.clone();
    if !h.mean.constant.is_finite() {
        h.mean.constant = fresh.mean.constant;
    }
    h
}

fn average<I: Iterator<Item = (f64, Vec<f64>)>>(it: I, j: f64) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut grad: Vec<f64> = Vec::new();
    for (v, g) in it {
        value += v / j;
        if grad.is_empty() {
            grad = vec![0.0; g.len()];
        }
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b / j;
        }
    }
    (value, grad)
}

/// Maximum over the box of the equal-weight mixture of posterior means,
/// never below the mixture mean at the evaluated points.
fn mixture_mean_max(
    states: &[PosteriorState],
    bounds: &crate::gp::Bounds,
    config: &AscentConfig,
    rng: &mut Rng,
) -> Result<MaximizerResult> {
    let j = states.len() as f64;
    let data = states[0].data();
    let at_data: Vec<f64> = (0..data.len())
        .map(|i| states.iter().map(|s| acq::observed_moments(s, i).0).sum::<f64>() / j)
        .collect();
    let best_i = (0..at_data.len()).fold(None, |b: Option<usize>, i| match b {
        Some(k) if at_data[k] >= at_data[i] => Some(k),
        _ => Some(i),
    });
    let anchors: Vec<Vec<f64>> = best_i.map(|i| vec![data.points()[i].clone()]).unwrap_or_default();
    let mut r = multistart_deterministic(
        |x| average(states.iter().map(|s| s.posterior_mean_grad(x)), j),
        bounds,
        config,
        &anchors,
        rng,
    )?;
    if let Some(i) = best_i {
        if at_data[i] > r.value {
            r.value = at_data[i];
            r.argmax = data.points()[i].clone();
        }
    }
    Ok(r)
}

/// Additive Gaussian observation noise for simulated objectives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSimulator {
    pub variance: f64,
}

/// Runs the loop to the budget against `objective`, optionally adding
/// simulated noise. Non-finite objective values are errors.
pub fn run_loop<F>(config: LoopConfig, mut objective: F, noise: Option<NoiseSimulator>) -> Result<Vec<TraceRecord>>
where
    F: FnMut(&[f64]) -> f64,
{
    try_run_loop(config, |x| Ok::<f64, std::convert::Infallible>(objective(x)), noise)
}

/// [`run_loop`] for fallible objectives; failures carry the evaluation index.
pub fn try_run_loop<F, E>(config: LoopConfig, mut objective: F, noise: Option<NoiseSimulator>) -> Result<Vec<TraceRecord>>
where
    F: FnMut(&[f64]) -> std::result::Result<f64, E>,
    E: Display,
{
    if let Some(ns) = noise {
        if !(ns.variance >= 0.0) || !ns.variance.is_finite() {
            return Err(Error::invalid("simulated noise variance must be finite and >= 0"));
        }
    }
    let seed = config.seed;
    let mut opt = Optimizer::new(config)?;
    while !opt.is_complete() {
        let s = opt.suggest()?;
        for x in s.points {
            if opt.is_complete() {
                break;
            }
            let iteration = opt.data().len() + 1;
            let mut y = objective(&x).map_err(|e| Error::Objective { iteration, message: e.to_string() })?;
            if !y.is_finite() {
                return Err(Error::Objective { iteration, message: format!("non-finite value {y}") });
            }
            if let Some(ns) = noise {
                let z: f64 = rng::substream(seed, NOISE_TAG, iteration as u64).sample(StandardNormal);
                y += ns.variance.sqrt() * z;
            }
            opt.ingest(x, y)?;
        }
    }
    Ok(opt.into_trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{Bounds, KernelFamily};

    fn config(budget: usize) -> LoopConfig {
        let mut c = LoopConfig::new(Bounds::new(vec![0.0], vec![4.0]).unwrap(), 3, budget);
        c.seed = 7;
        c
    }

    fn sinus(x: &[f64]) -> f64 {
        (3.0 * x[0]).sin() + x[0]
    }

    #[test]
    fn budget_equal_to_design_only_evaluates_design() {
        let c = config(3);
        let design = Optimizer::new(c.clone()).unwrap().design().to_vec();
        let trace = run_loop(c, sinus, None).unwrap();
        assert_eq!(trace.len(), 3);
        for (r, x) in trace.iter().zip(design) {
            assert_eq!(r.x, x);
            assert!(r.acq_value.is_none());
        }
    }

    #[test]
    fn constant_objective_has_constant_best() {
        let trace = run_loop(config(6), |_| 2.5, None).unwrap();
        assert_eq!(trace.len(), 6);
        assert!(trace.iter().all(|r| r.best_observed == 2.5));
    }

    #[test]
    fn trace_is_reproducible_and_monotone() {
        let a = run_loop(config(8), sinus, None).unwrap();
        let b = run_loop(config(8), sinus, None).unwrap();
        assert_eq!(a, b);
        for w in a.windows(2) {
            assert!(w[1].best_observed >= w[0].best_observed);
        }
        assert!(a.iter().all(|r| r.x[0] >= 0.0 && r.x[0] <= 4.0));
    }

    #[test]
    fn ingest_rejects_bad_input_and_keeps_state() {
        let mut opt = Optimizer::new(config(5)).unwrap();
        opt.ingest(vec![1.0], 0.5).unwrap();
        let before = opt.clone();
        assert!(opt.ingest(vec![1.0], f64::NAN).is_err());
        assert!(opt.ingest(vec![5.0], 1.0).is_err());
        assert!(opt.ingest(vec![1.0, 2.0], 1.0).is_err());
        assert_eq!(opt, before);
    }

    #[test]
    fn duplicate_noise_free_ingest_succeeds() {
        let mut c = config(5);
        c.hyper_mode = HyperMode::Fixed {
            hypers: Hyperparameters::isotropic(KernelFamily::Matern52, 1.0, 1.0, 1, 0.0, 0.0).unwrap(),
        };
        let mut opt = Optimizer::new(c).unwrap();
        opt.ingest(vec![1.0], 0.5).unwrap();
        opt.ingest(vec![1.0], 0.5).unwrap();
        let p = opt.posteriors().unwrap()[0].predict(&[1.0]).unwrap();
        assert!((p.mean - 0.5).abs() < 1e-5);
        opt.ingest(vec![2.0], 0.1).unwrap();
        assert_eq!(opt.trace().last().unwrap().best_observed, 0.5);
    }

    #[test]
    fn strict_pairing_rejects_off_policy_points() {
        let mut c = config(5);
        c.strict_pairing = true;
        let mut opt = Optimizer::new(c).unwrap();
        assert!(matches!(opt.ingest(vec![1.0], 0.5), Err(Error::Conflict(_))));
        let s = opt.suggest().unwrap();
        assert_eq!(s.phase, Phase::Design);
        opt.ingest(s.x().to_vec(), 0.5).unwrap();
        assert!(opt.pending().is_none());
    }

    #[test]
    fn recommend_modes() {
        let mut opt = Optimizer::new(config(5)).unwrap();
        opt.ingest(vec![1.0], 0.5).unwrap();
        assert_eq!(opt.recommend().unwrap(), Recommendation { x: vec![1.0], value: 0.5 });
        opt.ingest(vec![3.0], -0.5).unwrap();
        opt.ingest(vec![2.0], 0.9).unwrap();
        let r = opt.recommend_with(RecommendMode::MaxPosteriorMean).unwrap();
        assert!(r.value >= 0.9 - 1e-6);
    }

    #[test]
    fn objective_errors_carry_the_iteration() {
        let mut calls = 0;
        let err = try_run_loop(
            config(5),
            |_| {
                calls += 1;
                if calls == 2 {
                    Err("sensor offline")
                } else {
                    Ok(1.0)
                }
            },
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Objective { iteration: 2, .. }));
    }
}
