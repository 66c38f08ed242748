use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::normal::quantile;
use super::{fantasy_scale, McEstimate};
use crate::error::{Error, Result};
use crate::gp::{psd_factor, Bounds, PosteriorState, VARIANCE_CLAMP};
use crate::rng::{self, Rng};

const ES_TAG: u64 = 0x4553;

/// Evenly spaced tensor grid with `per_dim` points per coordinate (the
/// midpoint when `per_dim == 1`), first coordinate varying slowest.
pub fn tensor_grid(bounds: &Bounds, per_dim: usize) -> Result<Vec<Vec<f64>>> {
    if per_dim == 0 {
        return Err(Error::invalid("grid needs at least one point per dimension"));
    }
    let d = bounds.dim();
    let total = (per_dim as f64).powi(d as i32);
    if total > 1e5 {
        return Err(Error::invalid(format!("grid of {per_dim}^{d} points is too large")));
    }
    let axis = |i: usize, k: usize| {
        if per_dim == 1 {
            0.5 * (bounds.lower()[i] + bounds.upper()[i])
        } else {
            bounds.lower()[i] + bounds.width(i) * k as f64 / (per_dim - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(total as usize);
    let mut idx = vec![0usize; d];
    loop {
        out.push((0..d).map(|i| axis(i, idx[i])).collect());
        let mut pos = d;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < per_dim {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Standard normal vectors shared by every entropy estimate of one call.
fn normals(m: usize, samples: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..samples).map(|_| (0..m).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

/// Natural-log entropy of the empirical argmax distribution of
/// `means + L z` over the supplied draws `z`; ties go to the lowest index.
fn histogram_entropy(means: &[f64], factor: &DMatrix<f64>, zs: &[Vec<f64>]) -> f64 {
    let m = means.len();
    let mut counts = vec![0usize; m];
    let mut f = vec![0.0; m];
    for z in zs {
        for i in 0..m {
            f[i] = means[i] + (0..=i).map(|j| factor[(i, j)] * z[j]).sum::<f64>();
        }
        let mut best = 0;
        for i in 1..m {
            if f[i] > f[best] {
                best = i;
            }
        }
        counts[best] += 1;
    }
    let total = zs.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

struct GridPosterior {
    means: Vec<f64>,
    cov: DMatrix<f64>,
    tol: f64,
    zs: Vec<Vec<f64>>,
    prior_entropy: f64,
}

impl GridPosterior {
    fn new(state: &PosteriorState, grid: &[Vec<f64>], samples: usize, rng: &mut Rng) -> Result<Self> {
        if samples == 0 {
            return Err(Error::invalid("entropy search needs at least one argmax sample"));
        }
        let joint = state.predict_joint(grid)?;
        let tol = VARIANCE_CLAMP * state.hypers().kernel.amplitude;
        let zs = normals(grid.len(), samples, rng);
        let factor = psd_factor(&joint.covariance, tol);
        let prior_entropy = histogram_entropy(&joint.means, &factor, &zs);
        Ok(Self { means: joint.means, cov: joint.covariance, tol, zs, prior_entropy })
    }

    /// Entropy reduction from a fantasy observation with covariance `c` to
    /// the grid values and predictive standard deviation `s`.
    fn reduction(&self, c: &[f64], s: f64, quantiles: usize) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        let m = self.means.len();
        let s2 = s * s;
        let mut cov = self.cov.clone();
        for i in 0..m {
            for j in 0..m {
                cov[(i, j)] -= c[i] * c[j] / s2;
            }
        }
        let factor = psd_factor(&cov, self.tol);
        let mut total = 0.0;
        for k in 1..=quantiles {
            let zq = quantile(k as f64 / (quantiles + 1) as f64);
            let means: Vec<f64> = self.means.iter().zip(c).map(|(mu, ci)| mu + ci * zq / s).collect();
            total += histogram_entropy(&means, &factor, &self.zs);
        }
        self.prior_entropy - total / quantiles as f64
    }
}

fn check_grid(state: &PosteriorState, grid: &[Vec<f64>], quantiles: usize) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("entropy search grid is empty"));
    }
    if grid.iter().any(|p| p.len() != state.dim()) {
        return Err(Error::invalid("grid point has the wrong dimension"));
    }
    if quantiles == 0 {
        return Err(Error::invalid("entropy search needs at least one fantasy quantile"));
    }
    Ok(())
}

/// Entropy of the argmax distribution on `grid` estimated from `samples`
/// joint posterior draws.
pub fn argmax_entropy(state: &PosteriorState, grid: &[Vec<f64>], samples: usize, rng: &mut Rng) -> Result<f64> {
    check_grid(state, grid, 1)?;
    Ok(GridPosterior::new(state, grid, samples, rng)?.prior_entropy)
}

/// Expected reduction in the entropy of the grid argmax from observing `x`:
/// the current entropy minus the average entropy after a fantasy observation
/// at each of the Gaussian quantiles `k/(Q+1)`. All entropies share the same
/// standard normal draws.
pub fn entropy_search_grid(
    state: &PosteriorState,
    grid: &[Vec<f64>],
    x: &[f64],
    samples: usize,
    quantiles: usize,
    rng: &mut Rng,
) -> Result<f64> {
    check_grid(state, grid, quantiles)?;
    if x.len() != state.dim() {
        return Err(Error::invalid("point has the wrong dimension"));
    }
    if grid.len() == 1 {
        return Ok(0.0);
    }
    let gp = GridPosterior::new(state, grid, samples, rng)?;
    let c: Vec<f64> = grid.iter().map(|g| state.covariance(g, x)).collect();
    Ok(gp.reduction(&c, fantasy_scale(state, x), quantiles))
}

/// [`entropy_search_grid`] at every grid point, with one set of draws.
pub fn entropy_search_scores(
    state: &PosteriorState,
    grid: &[Vec<f64>],
    samples: usize,
    quantiles: usize,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    check_grid(state, grid, quantiles)?;
    if grid.len() == 1 {
        return Ok(vec![0.0]);
    }
    let gp = GridPosterior::new(state, grid, samples, rng)?;
    Ok((0..grid.len())
        .map(|i| {
            let c: Vec<f64> = (0..grid.len()).map(|g| gp.cov[(g, i)]).collect();
            gp.reduction(&c, fantasy_scale(state, &grid[i]), quantiles)
        })
        .collect())
}

/// Mean and standard error of [`entropy_search_grid`] over `repeats`
/// independent seeds derived from `rng`.
pub fn entropy_search_repeated(
    state: &PosteriorState,
    grid: &[Vec<f64>],
    x: &[f64],
    samples: usize,
    quantiles: usize,
    repeats: usize,
    rng: &mut Rng,
) -> Result<McEstimate> {
    if repeats < 2 {
        return Err(Error::invalid("repeated estimate needs at least two repeats"));
    }
    let root = rng::next_seed(rng);
    let values = (0..repeats)
        .map(|r| {
            let mut stream = rng::substream(root, ES_TAG, r as u64);
            entropy_search_grid(state, grid, x, samples, quantiles, &mut stream)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(McEstimate::from_samples(&values, 0))
}
