//! KGCP with an estimated noise level against EI on a noisy sphere.

use bayesopt::acq::AcquisitionSpec;
use bayesopt::bench::TestFunction;
use bayesopt::driver::{run_loop, LoopConfig, NoiseModel, NoiseSimulator};

fn main() -> bayesopt::Result<()> {
    let f = TestFunction::by_name("sphere-2")?;
    for (name, acq) in [("kgcp", AcquisitionSpec::Kgcp), ("ei", AcquisitionSpec::Ei)] {
        let mut config = LoopConfig::new(f.bounds.clone(), 5, 25);
        config.acquisition = acq;
        config.model.noise = NoiseModel::Estimate;
        config.seed = 11;
        let trace = run_loop(config, |x| f.value_grad(x).0, Some(NoiseSimulator { variance: 1e-3 }))?;
        let last = trace.last().expect("nonempty");
        let true_best = trace.iter().map(|r| f.value_grad(&r.x).0).fold(f64::NEG_INFINITY, f64::max);
        println!(
            "{name:>5}: best noise-free value {true_best:.2e}, fitted noise {:.2e}, best posterior mean {:.2e}",
            last.hypers.noise_variance, last.best_posterior_mean
        );
    }
    Ok(())
}
