//! Slice-sampled hyperparameters and the mixture predictive, compared with
//! the maximum-likelihood plug-in, then an EI run averaged over samples.

use bayesopt::driver::{run_loop, HyperMode, LoopConfig};
use bayesopt::gp::{
    fit_posterior, predict_marginalized, slice_sample_hyperparameters, Bounds, HyperPrior, Hyperparameters,
    KernelFamily, ObservationSet, ParamPrior,
};
use bayesopt::rng::seeded;

fn prior_for(h: &Hyperparameters) -> HyperPrior {
    let layout = h.layout();
    let mut prior = HyperPrior::flat(layout);
    prior.priors[layout.amplitude()] = ParamPrior::LogNormal { mu: 0.0, sigma: 1.0 };
    prior.priors[layout.lengthscale(0)] = ParamPrior::LogNormal { mu: 2.0, sigma: 1.0 };
    prior.priors[layout.noise()] = ParamPrior::Fixed;
    prior.priors[layout.constant()] = ParamPrior::Normal { mean: 0.0, sd: 2.0 };
    prior
}

fn main() -> bayesopt::Result<()> {
    let data = ObservationSet::from_parts(1, vec![vec![0.1], vec![0.3], vec![0.75]], vec![0.5, 1.2, -0.4])?;
    let template = Hyperparameters::isotropic(KernelFamily::Matern52, 1.0, 10.0, 1, 0.0, 1e-6)?;
    let prior = prior_for(&template);
    let samples = slice_sample_hyperparameters(&data, &template, &prior, 200, 100, &mut seeded(3))?;
    let amps: Vec<f64> = samples.iter().map(|s| s.kernel.amplitude).collect();
    println!("posterior mean amplitude {:.3}", amps.iter().sum::<f64>() / amps.len() as f64);

    let plug_in = fit_posterior(&data, &template)?;
    println!("{:>5} {:>10} {:>10} {:>10} {:>10}", "x", "mix mean", "mix sd", "fixed mean", "fixed sd");
    for i in 0..=8 {
        let x = [i as f64 / 8.0];
        let m = predict_marginalized(&data, &samples, &x)?;
        let p = plug_in.predict(&x)?;
        println!("{:>5.3} {:>10.4} {:>10.4} {:>10.4} {:>10.4}", x[0], m.mean(), m.variance().sqrt(), p.mean, p.std_dev());
    }

    let mut config = LoopConfig::new(Bounds::unit(1)?, 3, 10);
    config.hyper_mode = HyperMode::FullyBayesian { prior, samples: 10, burn_in: 50 };
    let trace = run_loop(config, |x| (8.0 * x[0]).sin() * x[0], None)?;
    println!("fully-Bayesian EI best after {} evaluations: {:.4}", trace.len(), trace.last().expect("nonempty").best_observed);
    Ok(())
}
