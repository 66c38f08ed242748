//! Entropy of the argmax distribution on a grid and the expected entropy
//! reduction of each candidate observation.

use bayesopt::acq::{argmax_entropy, entropy_search_scores, tensor_grid};
use bayesopt::gp::{fit_posterior, Bounds, Hyperparameters, KernelFamily, ObservationSet};
use bayesopt::rng::seeded;

fn main() -> bayesopt::Result<()> {
    let h = Hyperparameters::isotropic(KernelFamily::Matern52, 1.0, 30.0, 1, 0.0, 1e-4)?;
    let data = ObservationSet::from_parts(1, vec![vec![0.15], vec![0.5], vec![0.55], vec![0.9]], vec![0.3, 1.0, 0.95, -0.2])?;
    let state = fit_posterior(&data, &h)?;
    let grid = tensor_grid(&Bounds::unit(1)?, 21)?;
    let h0 = argmax_entropy(&state, &grid, 5000, &mut seeded(1))?;
    println!("argmax entropy {h0:.3} nats (uniform would be {:.3})", (grid.len() as f64).ln());
    let scores = entropy_search_scores(&state, &grid, 2000, 8, &mut seeded(2))?;
    for (x, s) in grid.iter().zip(&scores) {
        println!("{:>5.2} {:>8.4} {}", x[0], s, "#".repeat((s.max(0.0) * 200.0) as usize));
    }
    Ok(())
}
