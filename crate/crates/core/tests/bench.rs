use bayesopt::bench::{
    compare_policies, eval_test_function, grid_oracle_optimum, quantile, sample_gp_objective, OracleOptimum,
    TestFunction, RANDOM_SEARCH, TEST_FUNCTIONS,
};
use bayesopt::driver::LoopConfig;
use bayesopt::gp::{Bounds, Hyperparameters, KernelFamily};
use bayesopt::rng::seeded;
use std::f64::consts::PI;

#[derive(serde::Deserialize)]
struct Fixtures {
    oracles: Vec<OracleOptimum>,
}

fn fixtures() -> Fixtures {
    let text = include_str!("../fixtures/oracles.json");
    serde_json::from_str(text).unwrap()
}

#[test]
fn committed_fixtures_match_recomputation() {
    for f in fixtures().oracles {
        let fresh = grid_oracle_optimum(&f.name, f.resolution).unwrap();
        assert_eq!(fresh, f, "{}", f.name);
    }
}

#[test]
fn fixtures_agree_with_closed_forms() {
    let fx = fixtures();
    let get = |name: &str| fx.oracles.iter().find(|o| o.name == name).unwrap();
    // sin(3x) + x peaks where cos(3x) = -1/3 with sin(3x) = 2 sqrt(2) / 3
    let x_star = (2.0 * PI + (-1.0f64 / 3.0).acos()) / 3.0;
    let sinus = get("sinus-1d");
    assert!((sinus.x[0] - x_star).abs() < 1e-7);
    assert!((sinus.value - (x_star + 8f64.sqrt() / 3.0)).abs() < 1e-12);
    // Branin minimum 0.397887 at (-pi, 12.275), (pi, 2.275), (9.42478, 2.475)
    let branin = get("branin-2d");
    assert!((branin.value + 0.397_887).abs() < 1e-6);
    assert!((-0.397_887_357_729_7 - branin.value).abs() < 1e-12);
    assert!((branin.x[0].abs() - PI).abs() < 1e-6 || (branin.x[0] - 3.0 * PI).abs() < 1e-6);
    let sphere = get("sphere-2");
    assert!(sphere.value.abs() < 1e-20);
}

#[test]
fn branin_has_three_global_maximizers() {
    for x in [[-PI, 12.275], [PI, 2.275], [3.0 * PI, 2.475]] {
        assert!((eval_test_function("branin-2d", &x).unwrap() + 0.397_887_357_729_7).abs() < 1e-12);
    }
}

#[test]
fn every_named_function_evaluates_inside_its_box() {
    for name in TEST_FUNCTIONS {
        let f = TestFunction::by_name(name).unwrap();
        let mid = f.bounds.midpoint();
        assert!(f.eval(&mid).unwrap().is_finite());
        let mut outside = mid.clone();
        outside[0] = f.bounds.upper()[0] + 1.0;
        assert!(f.eval(&outside).is_err());
    }
    assert!(TestFunction::by_name("rosenbrock").is_err());
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut rng = seeded(1);
    for name in TEST_FUNCTIONS {
        let f = TestFunction::by_name(name).unwrap();
        for _ in 0..5 {
            let inner = Bounds::new(
                (0..f.dim()).map(|i| f.bounds.lower()[i] + 0.01 * f.bounds.width(i)).collect(),
                (0..f.dim()).map(|i| f.bounds.upper()[i] - 0.01 * f.bounds.width(i)).collect(),
            )
            .unwrap();
            let x = inner.sample_uniform(&mut rng);
            let (_, g) = f.value_grad(&x);
            for c in 0..f.dim() {
                let h = 1e-6 * f.bounds.width(c);
                let (mut up, mut down) = (x.clone(), x.clone());
                up[c] += h;
                down[c] -= h;
                let fd = (f.value_grad(&up).0 - f.value_grad(&down).0) / (2.0 * h);
                assert!((g[c] - fd).abs() < 1e-5 * (1.0 + fd.abs()), "{name}[{c}]: {} vs {fd}", g[c]);
            }
        }
    }
}

#[test]
fn gp_sample_objective_interpolates_its_grid() {
    let h = Hyperparameters::isotropic(KernelFamily::Matern52, 1.0, 20.0, 2, 0.0, 0.0).unwrap();
    let f = sample_gp_objective(&h, &Bounds::unit(2).unwrap(), 21, &mut seeded(4)).unwrap();
    let o = f.oracle_optimum(41).unwrap();
    assert!(f.bounds.contains(&o.x));
    let corner = f.eval(&[0.0, 0.0]).unwrap();
    assert!(corner <= o.value);
    assert!(sample_gp_objective(&h, &Bounds::unit(3).unwrap(), 5, &mut seeded(4)).is_err());
}

#[test]
fn quantile_interpolates_linearly() {
    let v = [4.0, 1.0, 3.0, 2.0];
    assert_eq!(quantile(&v, 0.0), 1.0);
    assert_eq!(quantile(&v, 1.0), 4.0);
    assert_eq!(quantile(&v, 0.5), 2.5);
    assert_eq!(quantile(&v, 0.25), 1.75);
}

#[test]
fn comparison_is_reproducible_and_well_formed() {
    let f = TestFunction::by_name("sinus-1d").unwrap();
    let mut cfg = LoopConfig::new(f.bounds.clone(), 3, 6);
    cfg.seed = 17;
    cfg.optimizer.restarts = 3;
    let run = || compare_policies(&[("ei".into(), cfg.clone())], |x| f.value_grad(x).0, 3, None).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    let csv = a.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("policy,seed,n,best_value"));
    assert_eq!(lines.count(), 2 * 3 * 6);
    for policy in ["ei", RANDOM_SEARCH] {
        let s = &a.summary[policy];
        assert_eq!(s.n, (1..=6).collect::<Vec<_>>());
        for i in 0..6 {
            assert!(s.q25[i] <= s.median[i] && s.median[i] <= s.q75[i]);
            if i > 0 {
                assert!(s.median[i] >= s.median[i - 1]);
            }
        }
        assert_eq!(a.final_best(policy).len(), 3);
    }
    let summary: serde_json::Value = serde_json::from_str(&a.summary_json()).unwrap();
    assert!(summary.get("ei").is_some());
    assert!(compare_policies(&[(RANDOM_SEARCH.into(), cfg.clone())], |x| x[0], 2, None).is_err());
    assert!(compare_policies(&[("ei".into(), cfg)], |x| x[0], 1, None).is_err());
}
