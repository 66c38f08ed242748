//! Knowledge gradient on a fixed posterior: the Monte-Carlo value and its
//! stochastic gradient across the domain, then a short KG-driven run on
//! noisy Branin.

use bayesopt::acq::{kg_estimate, kg_gradient_estimate, AcquisitionSpec, InnerDomain};
use bayesopt::bench::TestFunction;
use bayesopt::driver::{run_loop, LoopConfig, NoiseModel, NoiseSimulator};
use bayesopt::gp::{fit_posterior, Bounds, Hyperparameters, KernelFamily, ObservationSet};
use bayesopt::rng::seeded;

fn main() -> bayesopt::Result<()> {
    let h = Hyperparameters::isotropic(KernelFamily::Matern52, 1.0, 25.0, 1, 0.0, 0.01)?;
    let data = ObservationSet::from_parts(1, vec![vec![0.1], vec![0.4], vec![0.8]], vec![0.2, 0.9, 0.1])?;
    let state = fit_posterior(&data, &h)?;
    let domain = InnerDomain::Box(Bounds::unit(1)?);
    println!("{:>5} {:>10} {:>9} {:>10}", "x", "KG", "SE", "dKG/dx");
    for i in 0..=10 {
        let x = [i as f64 / 10.0];
        let v = kg_estimate(&state, &x, 2000, domain.clone(), &mut seeded(i))?;
        let g = kg_gradient_estimate(&state, &x, 200, domain.clone(), &mut seeded(100 + i))?;
        println!("{:>5.2} {:>10.5} {:>9.1e} {:>10.4}", x[0], v.value, v.std_error, g.gradient[0]);
    }

    let f = TestFunction::by_name("branin-2d")?;
    let mut config = LoopConfig::new(f.bounds.clone(), 6, 16);
    config.acquisition = AcquisitionSpec::Kg {
        restarts: 4,
        iterations: 30,
        step_constant: 4.0,
        eval_replications: 200,
        gradient_replications: 4,
    };
    config.model.noise = NoiseModel::Fixed { variance: 0.25 };
    let trace = run_loop(config, |x| f.value_grad(x).0, Some(NoiseSimulator { variance: 0.25 }))?;
    let last = trace.last().expect("nonempty");
    println!("noisy Branin after {} evaluations: best posterior mean {:.3} (optimum -0.398)", last.n, last.best_posterior_mean);
    Ok(())
}
