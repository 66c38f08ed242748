//! Fits a Matern-5/2 GP to noisy samples of a sine by maximum likelihood and
//! prints the posterior band on a grid.

use bayesopt::gp::{fit_hyperparameters, fit_posterior, Bounds, FitMode, HyperBounds, Hyperparameters, KernelFamily, ObservationSet};
use bayesopt::rng::seeded;
use rand::Rng as _;
use rand_distr::StandardNormal;

fn main() -> bayesopt::Result<()> {
    let mut rng = seeded(1);
    let domain = Bounds::unit(1)?;
    let mut data = ObservationSet::new(1);
    for i in 0..12 {
        let x = (i as f64 + 0.5) / 12.0;
        let noise: f64 = rng.sample(StandardNormal);
        data.push(vec![x], (6.0 * x).sin() + 0.1 * noise)?;
    }

    let template = Hyperparameters::isotropic(KernelFamily::Matern52, 1.0, 10.0, 1, 0.0, 0.01)?;
    let bounds = HyperBounds::default_for(&data, &domain, &template, true);
    let fit = fit_hyperparameters(&data, &template, &FitMode::Mle, &bounds, 5, &mut rng)?;
    let h = &fit.hypers;
    println!(
        "log likelihood {:.3}: amplitude {:.3}, lengthscale {:.3}, noise {:.2e}, mean {:.3}",
        fit.objective,
        h.kernel.amplitude,
        h.kernel.inv_sq_lengthscales[0].powf(-0.5),
        h.noise_variance,
        h.mean.constant
    );

    let state = fit_posterior(&data, h)?;
    println!("{:>6} {:>9} {:>9} {:>9}", "x", "truth", "mean", "sd");
    for i in 0..=10 {
        let x = i as f64 / 10.0;
        let p = state.predict(&[x])?;
        println!("{x:>6.2} {:>9.4} {:>9.4} {:>9.4}", (6.0 * x).sin(), p.mean, p.std_dev());
    }
    Ok(())
}
