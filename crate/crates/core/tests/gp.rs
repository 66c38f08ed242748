mod common;

use bayesopt::gp::{
    fit_hyperparameters, fit_posterior, log_marginal_likelihood_grad, slice_sample_hyperparameters, Bounds,
    FitMode, HyperBounds, HyperPrior, Hyperparameters, KernelFamily, ObservationSet, ParamPrior,
};
use bayesopt::rng::seeded;
use common::*;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = KernelFamily> {
    (0usize..4).prop_map(|i| FAMILIES[i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gram_matrix_is_symmetric_psd(seed in any::<u64>(), fam in family(), n in 2usize..12, d in 1usize..4) {
        let mut rng = seeded(seed);
        let h = random_hypers(&mut rng, d, fam, 0.0);
        let data = random_data(&mut rng, d, n);
        let pts = data.points();
        let k = DMatrix::from_fn(n, n, |i, j| h.kernel.value(&pts[i], &pts[j]));
        for i in 0..n {
            prop_assert!((k[(i, i)] - h.kernel.amplitude).abs() <= 1e-12 * h.kernel.amplitude);
            for j in 0..n {
                prop_assert_eq!(k[(i, j)], k[(j, i)]);
            }
        }
        let min = SymmetricEigen::new(k).eigenvalues.min();
        prop_assert!(min >= -1e-10 * h.kernel.amplitude * n as f64, "min eigenvalue {min}");
    }

    #[test]
    fn posterior_variance_shrinks_below_prior(seed in any::<u64>(), fam in family(), n in 1usize..10) {
        let mut rng = seeded(seed);
        let h = random_hypers(&mut rng, 2, fam, 0.01);
        let state = fit_posterior(&random_data(&mut rng, 2, n), &h).unwrap();
        for _ in 0..10 {
            let x = Bounds::unit(2).unwrap().sample_uniform(&mut rng);
            let p = state.predict(&x).unwrap();
            prop_assert!(p.variance >= 0.0);
            prop_assert!(p.variance <= h.kernel.amplitude * (1.0 + 1e-12));
        }
    }

    #[test]
    fn extra_observation_never_raises_variance(seed in any::<u64>(), fam in family(), n in 1usize..8) {
        let mut rng = seeded(seed);
        let h = random_hypers(&mut rng, 1, fam, 0.05);
        let data = random_data(&mut rng, 1, n + 1);
        let smaller = ObservationSet::from_parts(1, data.points()[..n].to_vec(), data.values()[..n].to_vec()).unwrap();
        let (a, b) = (fit_posterior(&smaller, &h).unwrap(), fit_posterior(&data, &h).unwrap());
        for i in 0..=20 {
            let x = [i as f64 / 20.0];
            prop_assert!(b.predict(&x).unwrap().variance <= a.predict(&x).unwrap().variance + 1e-10);
        }
    }

    #[test]
    fn variance_grows_with_noise(seed in any::<u64>(), fam in family(), n in 1usize..8) {
        let mut rng = seeded(seed);
        let h = random_hypers(&mut rng, 2, fam, 0.01);
        let data = random_data(&mut rng, 2, n);
        let mut louder = h.clone();
        louder.noise_variance = 0.1;
        let (a, b) = (fit_posterior(&data, &h).unwrap(), fit_posterior(&data, &louder).unwrap());
        for _ in 0..10 {
            let x = Bounds::unit(2).unwrap().sample_uniform(&mut rng);
            prop_assert!(b.predict(&x).unwrap().variance >= a.predict(&x).unwrap().variance - 1e-10);
        }
    }

    #[test]
    fn joint_diagonal_matches_marginals(seed in any::<u64>(), fam in family(), n in 1usize..8) {
        let mut rng = seeded(seed);
        let h = random_hypers(&mut rng, 2, fam, 0.0);
        let data = random_data(&mut rng, 2, n);
        let state = fit_posterior(&data, &h).unwrap();
        let mut xs: Vec<Vec<f64>> = (0..5).map(|_| Bounds::unit(2).unwrap().sample_uniform(&mut rng)).collect();
        xs.extend(data.points().iter().take(2).cloned());
        let joint = state.predict_joint(&xs).unwrap();
        for (i, x) in xs.iter().enumerate() {
            let p = state.predict(x).unwrap();
            prop_assert!((joint.means[i] - p.mean).abs() <= 1e-10 * (1.0 + p.mean.abs()));
            prop_assert!((joint.covariance[(i, i)] - p.variance).abs() <= 1e-10 * h.kernel.amplitude);
        }
    }

    #[test]
    fn noise_free_posterior_interpolates(seed in any::<u64>(), fam in family(), n in 1usize..10, d in 1usize..4) {
        let mut rng = seeded(seed);
        let h = random_hypers(&mut rng, d, fam, 0.0);
        let data = random_data(&mut rng, d, n);
        let state = fit_posterior(&data, &h).unwrap();
        for (x, y) in data.points().iter().zip(data.values()) {
            let p = state.predict(x).unwrap();
            prop_assert!((p.mean - y).abs() <= 1e-6 * (1.0 + y.abs()));
            prop_assert!(p.variance <= 1e-5 * h.kernel.amplitude);
        }
    }

    #[test]
    fn lml_matches_dense_oracle(seed in any::<u64>(), fam in family(), n in 1usize..10) {
        let mut rng = seeded(seed);
        let h = random_hypers(&mut rng, 2, fam, 0.02);
        let state = fit_posterior(&random_data(&mut rng, 2, n), &h).unwrap();
        let oracle = DenseOracle::new(&state).lml();
        prop_assert!(rel_err(state.log_marginal_likelihood(), oracle, 1.0) <= 1e-9);
    }
}

#[test]
fn lml_gradient_matches_finite_differences() {
    let mut rng = seeded(11);
    for (k, fam) in FAMILIES.iter().enumerate() {
        let h = random_hypers(&mut rng, 2, *fam, 0.05);
        let data = random_data(&mut rng, 2, 6 + k);
        let (value, grad) = log_marginal_likelihood_grad(&data, &h).unwrap();
        assert!((value - fit_posterior(&data, &h).unwrap().log_marginal_likelihood()).abs() < 1e-10);
        let u = h.to_unconstrained();
        for i in 0..u.len() {
            let step = 1e-5;
            let (mut up, mut down) = (u.clone(), u.clone());
            up[i] += step;
            down[i] -= step;
            let f = |v: &[f64]| log_marginal_likelihood_grad(&data, &h.with_unconstrained(v)).unwrap().0;
            let fd = (f(&up) - f(&down)) / (2.0 * step);
            assert!(rel_err(grad[i], fd, 1.0) < 1e-4, "{fam:?} slot {i}: {} vs {fd}", grad[i]);
        }
    }
}

#[test]
fn lml_of_two_points_matches_bivariate_normal() {
    let h = Hyperparameters::isotropic(KernelFamily::Matern12, 2.0, 1.0, 1, 0.5, 0.1).unwrap();
    let data = ObservationSet::from_parts(1, vec![vec![0.0], vec![1.0]], vec![1.0, -0.5]).unwrap();
    let state = fit_posterior(&data, &h).unwrap();
    let j = state.jitter();
    let (a, c) = (2.0 + 0.1 + j, 2.0 * (-1f64).exp());
    let (r1, r2) = (0.5, -1.0);
    let det = a * a - c * c;
    let quad = (a * r1 * r1 - 2.0 * c * r1 * r2 + a * r2 * r2) / det;
    let expected = -0.5 * quad - 0.5 * det.ln() - (2.0 * std::f64::consts::PI).ln();
    assert!((state.log_marginal_likelihood() - expected).abs() < 1e-12);
}

#[test]
fn map_with_flat_prior_equals_mle() {
    let mut rng = seeded(21);
    let h = random_hypers(&mut rng, 2, KernelFamily::Matern52, 0.0);
    let data = random_data(&mut rng, 2, 10);
    let bounds = HyperBounds::default_for(&data, &Bounds::unit(2).unwrap(), &h, false);
    let mle = fit_hyperparameters(&data, &h, &FitMode::Mle, &bounds, 3, &mut seeded(5)).unwrap();
    let map = fit_hyperparameters(&data, &h, &FitMode::Map { prior: HyperPrior::flat(h.layout()) }, &bounds, 3, &mut seeded(5))
        .unwrap();
    assert_eq!(mle.hypers, map.hypers);
    assert_eq!(mle.objective, map.objective);
}

#[test]
fn fitting_improves_the_likelihood() {
    let mut rng = seeded(22);
    let h = random_hypers(&mut rng, 1, KernelFamily::Matern32, 0.0);
    let data = random_data(&mut rng, 1, 8);
    let bounds = HyperBounds::default_for(&data, &Bounds::unit(1).unwrap(), &h, false);
    let fit = fit_hyperparameters(&data, &h, &FitMode::Mle, &bounds, 4, &mut rng).unwrap();
    let start = fit_posterior(&data, &h).unwrap().log_marginal_likelihood();
    assert!(fit.objective >= start - 1e-9);
}

#[test]
fn slice_sampler_respects_fixed_slots_and_support() {
    let mut rng = seeded(31);
    let h = Hyperparameters::isotropic(KernelFamily::Matern52, 1.0, 10.0, 1, 0.0, 0.01).unwrap();
    let data = random_data(&mut rng, 1, 6);
    let layout = h.layout();
    let mut prior = HyperPrior::flat(layout);
    for p in prior.priors.iter_mut() {
        *p = ParamPrior::Fixed;
    }
    prior.priors[layout.amplitude()] = ParamPrior::LogNormal { mu: 0.0, sigma: 1.0 };
    prior.priors[layout.lengthscale(0)] = ParamPrior::Uniform { lo: 1.0, hi: 100.0 };
    let draws = slice_sample_hyperparameters(&data, &h, &prior, 30, 20, &mut rng).unwrap();
    assert_eq!(draws.len(), 30);
    for d in &draws {
        assert!((d.noise_variance - h.noise_variance).abs() < 1e-12 * h.noise_variance);
        assert!((d.mean.constant - h.mean.constant).abs() < 1e-12);
        assert!(d.kernel.amplitude > 0.0);
        let inv = d.kernel.inv_sq_lengthscales[0];
        assert!((1.0..=100.0).contains(&inv), "{inv}");
    }
    let distinct = draws.windows(2).filter(|w| w[0] != w[1]).count();
    assert!(distinct > 10);
}

#[test]
fn slice_sampler_without_data_recovers_the_prior_mean() {
    let h = Hyperparameters::isotropic(KernelFamily::Matern52, 1.0, 10.0, 1, 0.0, 0.0).unwrap();
    let layout = h.layout();
    let mut prior = HyperPrior::flat(layout);
    for p in prior.priors.iter_mut() {
        *p = ParamPrior::Fixed;
    }
    prior.priors[layout.constant()] = ParamPrior::Normal { mean: 2.0, sd: 0.5 };
    let draws = slice_sample_hyperparameters(&ObservationSet::new(1), &h, &prior, 4000, 100, &mut seeded(32)).unwrap();
    let values: Vec<f64> = draws.iter().map(|d| d.mean.constant).collect();
    let (m, _) = mean_se(&values);
    let sd = (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt();
    assert!((m - 2.0).abs() < 0.08, "mean {m}");
    assert!((sd - 0.5).abs() < 0.06, "sd {sd}");
}

#[test]
fn improper_prior_is_rejected_for_sampling() {
    let h = Hyperparameters::isotropic(KernelFamily::Matern52, 1.0, 10.0, 1, 0.0, 0.0).unwrap();
    let prior = HyperPrior::flat(h.layout());
    assert!(slice_sample_hyperparameters(&ObservationSet::new(1), &h, &prior, 5, 5, &mut seeded(1)).is_err());
}
