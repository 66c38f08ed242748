use bayesopt::acq::{AcquisitionSpec, LieValue, QeiMethod};
use bayesopt::driver::{
    initial_design, run_loop, DesignMethod, HyperMode, LoopConfig, NoiseModel, NoiseSimulator, Optimizer, Phase,
    RecommendMode,
};
use bayesopt::gp::{Bounds, HyperPrior, ParamPrior};
use bayesopt::rng::seeded;
use bayesopt::Error;
use proptest::prelude::*;

fn sinus(x: &[f64]) -> f64 {
    (3.0 * x[0]).sin() + x[0]
}

fn quick(acq: AcquisitionSpec, budget: usize, seed: u64) -> LoopConfig {
    let mut cfg = LoopConfig::new(Bounds::new(vec![0.0], vec![4.0]).unwrap(), 3, budget);
    cfg.acquisition = acq;
    cfg.seed = seed;
    cfg.optimizer.restarts = 3;
    cfg
}

fn small_kg() -> AcquisitionSpec {
    AcquisitionSpec::Kg { restarts: 2, iterations: 10, step_constant: 4.0, eval_replications: 50, gradient_replications: 2 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn design_is_inside_the_box(seed in any::<u64>(), n0 in 1usize..20, lhs in any::<bool>()) {
        let b = Bounds::new(vec![-1.0, 2.0, 0.0], vec![1.0, 5.0, 0.1]).unwrap();
        let method = if lhs { DesignMethod::LatinHypercube } else { DesignMethod::Uniform };
        let pts = initial_design(n0, &b, method, &mut seeded(seed)).unwrap();
        prop_assert_eq!(pts.len(), n0);
        prop_assert!(pts.iter().all(|p| b.contains(p)));
    }

    #[test]
    fn ei_trace_invariants(seed in any::<u64>()) {
        let trace = run_loop(quick(AcquisitionSpec::Ei, 7, seed), sinus, None).unwrap();
        prop_assert_eq!(trace.len(), 7);
        for (i, r) in trace.iter().enumerate() {
            prop_assert_eq!(r.n, i + 1);
            prop_assert!((0.0..=4.0).contains(&r.x[0]));
            prop_assert_eq!(r.y, sinus(&r.x));
            prop_assert_eq!(r.acq_value.is_some(), i >= 3);
            prop_assert_eq!(r.elapsed_ms, 0);
            if i > 0 {
                prop_assert!(r.best_observed >= trace[i - 1].best_observed);
            }
            let best = trace[..=i].iter().map(|t| t.y).fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(r.best_observed, best);
        }
    }
}

#[test]
fn every_acquisition_kind_completes_a_short_run() {
    let kinds = vec![
        AcquisitionSpec::Ei,
        small_kg(),
        AcquisitionSpec::Kgcp,
        AcquisitionSpec::Qei { q: 2, replications: 500, method: QeiMethod::ConstantLiar, lie: LieValue::Min },
        AcquisitionSpec::Qei { q: 3, replications: 500, method: QeiMethod::default(), lie: LieValue::Mean },
        AcquisitionSpec::Es { grid_size: 15, fantasy_quantiles: 5, argmax_samples: 200 },
    ];
    for acq in kinds {
        let name = acq.name();
        let trace = run_loop(quick(acq, 8, 1), sinus, None).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(trace.len(), 8, "{name}");
    }
}

#[test]
fn batches_are_truncated_to_the_remaining_budget() {
    let cfg = quick(AcquisitionSpec::Qei { q: 4, replications: 200, method: QeiMethod::ConstantLiar, lie: LieValue::Mean }, 5, 2);
    let mut opt = Optimizer::new(cfg).unwrap();
    for _ in 0..3 {
        let s = opt.suggest().unwrap();
        assert_eq!(s.phase, Phase::Design);
        let x = s.x().to_vec();
        opt.ingest(x.clone(), sinus(&x)).unwrap();
    }
    let s = opt.suggest().unwrap();
    assert_eq!(s.phase, Phase::Adaptive);
    assert_eq!(s.points.len(), 2);
}

#[test]
fn noisy_kgcp_with_estimated_noise() {
    let mut cfg = quick(AcquisitionSpec::Kgcp, 10, 3);
    cfg.model.noise = NoiseModel::Estimate;
    let trace = run_loop(cfg, sinus, Some(NoiseSimulator { variance: 0.01 })).unwrap();
    assert_eq!(trace.len(), 10);
    assert!(trace.iter().any(|r| r.hypers.noise_variance > 0.0));
    // observations carry noise, so y differs from the objective
    assert!(trace.iter().any(|r| r.y != sinus(&r.x)));
}

#[test]
fn fully_bayesian_mode_keeps_the_requested_sample_count() {
    let cfg0 = quick(AcquisitionSpec::Ei, 6, 4);
    let template = cfg0.model.template(&bayesopt::gp::ObservationSet::new(1), &cfg0.bounds).unwrap();
    let layout = template.layout();
    let mut prior = HyperPrior::flat(layout);
    for p in prior.priors.iter_mut() {
        *p = ParamPrior::Fixed;
    }
    prior.priors[layout.amplitude()] = ParamPrior::LogNormal { mu: 0.0, sigma: 1.0 };
    prior.priors[layout.lengthscale(0)] = ParamPrior::LogNormal { mu: 0.0, sigma: 1.5 };
    prior.priors[layout.constant()] = ParamPrior::Normal { mean: 0.0, sd: 3.0 };
    let mut cfg = cfg0;
    cfg.hyper_mode = HyperMode::FullyBayesian { prior, samples: 4, burn_in: 10 };
    let mut opt = Optimizer::new(cfg).unwrap();
    while !opt.is_complete() {
        let x = opt.suggest().unwrap().x().to_vec();
        opt.ingest(x.clone(), sinus(&x)).unwrap();
    }
    assert_eq!(opt.hyperparameters().len(), 4);
    assert_eq!(opt.posteriors().unwrap().len(), 4);
}

#[test]
fn off_policy_observations_are_accepted_when_not_strict() {
    let mut opt = Optimizer::new(quick(AcquisitionSpec::Ei, 6, 5)).unwrap();
    opt.suggest().unwrap();
    let r = opt.ingest(vec![1.0], sinus(&[1.0])).unwrap();
    assert_eq!(r.acq_value, None);
    assert!(opt.pending().is_none());
    assert_eq!(opt.data().len(), 1);
}

#[test]
fn strict_pairing_rejects_unsuggested_points() {
    let mut cfg = quick(AcquisitionSpec::Ei, 6, 6);
    cfg.strict_pairing = true;
    let mut opt = Optimizer::new(cfg).unwrap();
    opt.suggest().unwrap();
    assert!(matches!(opt.ingest(vec![1.234], 0.0), Err(Error::Conflict(_))));
    assert_eq!(opt.data().len(), 0);
}

#[test]
fn optimizer_keeps_suggesting_single_points_past_the_budget() {
    let mut opt = Optimizer::new(quick(AcquisitionSpec::Ei, 3, 7)).unwrap();
    for _ in 0..3 {
        let x = opt.suggest().unwrap().x().to_vec();
        opt.ingest(x.clone(), sinus(&x)).unwrap();
    }
    assert!(opt.is_complete());
    assert_eq!(opt.suggest().unwrap().points.len(), 1);
}

#[test]
fn recommendations_lie_in_the_box() {
    let trace_cfg = quick(AcquisitionSpec::Ei, 8, 8);
    let mut opt = Optimizer::new(trace_cfg).unwrap();
    while !opt.is_complete() {
        let x = opt.suggest().unwrap().x().to_vec();
        opt.ingest(x.clone(), sinus(&x)).unwrap();
    }
    let best = opt.recommend_with(RecommendMode::BestObserved).unwrap();
    assert_eq!(best.value, opt.best_observed().unwrap().1);
    let pm = opt.recommend_with(RecommendMode::MaxPosteriorMean).unwrap();
    assert!((0.0..=4.0).contains(&pm.x[0]));
    assert!(pm.value >= opt.trace().last().unwrap().best_posterior_mean - 1e-6);
}

#[test]
fn optimizer_state_survives_json() {
    let mut opt = Optimizer::new(quick(small_kg(), 8, 9)).unwrap();
    for _ in 0..4 {
        let x = opt.suggest().unwrap().x().to_vec();
        opt.ingest(x.clone(), sinus(&x)).unwrap();
    }
    let text = serde_json::to_string(&opt).unwrap();
    let back: Optimizer = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), text);
    assert_eq!(opt.compute_suggestion().unwrap().points, back.compute_suggestion().unwrap().points);
}

#[test]
fn config_json_uses_defaults() {
    let cfg: LoopConfig =
        serde_json::from_str(r#"{"bounds": {"lower": [0], "upper": [1]}, "n0": 2, "budget": 5}"#).unwrap();
    assert_eq!(cfg, LoopConfig::new(Bounds::unit(1).unwrap(), 2, 5));
    let bad: LoopConfig =
        serde_json::from_str(r#"{"bounds": {"lower": [0], "upper": [1]}, "n0": 6, "budget": 5}"#).unwrap();
    assert!(Optimizer::new(bad).is_err());
}
