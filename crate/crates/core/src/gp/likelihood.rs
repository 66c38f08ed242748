use nalgebra::DMatrix;

use super::hyper::Hyperparameters;
use super::posterior::{backward_solve, factorize, forward_solve, kernel_matrix};
use super::types::ObservationSet;
use crate::error::{Error, Result};

/// Log marginal likelihood and its gradient with respect to the
/// unconstrained parameter vector of `hypers` (see [`super::hyper`]).
///
/// The jitter is held at the level selected by the factorization; its
/// proportionality to the amplitude is included in the amplitude slot.
pub fn log_marginal_likelihood_grad(
    data: &ObservationSet,
    hypers: &Hyperparameters,
) -> Result<(f64, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::invalid("log marginal likelihood needs at least one observation"));
    }
    let n = data.len();
    let layout = hypers.layout();
    let pts = data.points();
    let k = kernel_matrix(pts, hypers);
    let (l, jitter) = factorize(&k, hypers)?;

    let resid: Vec<f64> = pts
        .iter()
        .zip(data.values())
        .map(|(x, y)| y - hypers.mean.eval(x))
        .collect();
    let mut z = resid.clone();
    forward_solve(&l, &mut z);
    let quad: f64 = z.iter().map(|v| v * v).sum();
    let logdet: f64 = l.diagonal().iter().map(|d| d.ln()).sum();
    let lml = -0.5 * quad - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    let mut alpha = z;
    backward_solve(&l, &mut alpha);

    // W = alpha alpha^T - (K + D)^{-1}
    let mut inv = DMatrix::<f64>::identity(n, n);
    for c in 0..n {
        let mut col: Vec<f64> = inv.column(c).iter().copied().collect();
        forward_solve(&l, &mut col);
        backward_solve(&l, &mut col);
        inv.set_column(c, &nalgebra::DVector::from_vec(col));
    }
    let w = |i: usize, j: usize| alpha[i] * alpha[j] - inv[(i, j)];
    let trace_w: f64 = (0..n).map(|i| w(i, i)).sum();

    let mut grad = vec![0.0; layout.len()];
    let kern = &hypers.kernel;
    for i in 0..n {
        for j in 0..n {
            let wij = w(i, j);
            grad[layout.amplitude()] += 0.5 * wij * k[(i, j)];
            if i != j {
                let r2 = kern.sq_dist(&pts[i], &pts[j]);
                let slope = kern.profile_slope(r2);
                for (dim, a) in kern.inv_sq_lengthscales.iter().enumerate() {
                    let diff = pts[i][dim] - pts[j][dim];
                    grad[layout.lengthscale(dim)] += 0.5 * wij * a * diff * diff * slope;
                }
            }
        }
    }
    grad[layout.amplitude()] += 0.5 * jitter * trace_w;
    grad[layout.noise()] = 0.5 * hypers.noise_variance * trace_w;
    grad[layout.constant()] = alpha.iter().sum();
    for (kidx, psi) in hypers.mean.basis.iter().enumerate() {
        grad[layout.coefficient(kidx)] = pts.iter().zip(&alpha).map(|(x, a)| a * psi.eval(x)).sum();
    }
    Ok((lml, grad))
}
