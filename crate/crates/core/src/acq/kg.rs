use rand_distr::{Distribution, StandardNormal};

use super::{check_drops, maximize_posterior_mean, mean_and_se, observed_index, observed_moments, McEstimate};
use crate::acqopt::{local_gradient_ascent, AscentConfig};
use crate::error::{Error, Result};
use crate::gp::{backward_solve, Bounds, PosteriorState, VARIANCE_CLAMP};
use crate::rng::Rng;

/// Standard deviation of the fantasy observation at `x`:
/// `sqrt(sigma_n^2(x) + noise)`, zero when re-observing a noise-free point.
pub fn fantasy_scale(state: &PosteriorState, x: &[f64]) -> f64 {
    let noise = state.hypers().noise_variance;
    if let Some(i) = observed_index(state, x) {
        return (observed_moments(state, i).1 + noise).sqrt();
    }
    let (_, var) = state.moments(x);
    let s2 = var.max(0.0) + noise;
    if s2 <= VARIANCE_CLAMP * state.hypers().kernel.amplitude {
        0.0
    } else {
        s2.sqrt()
    }
}

/// Posterior mean after appending the fantasy observation `(x_new, y_new)`,
/// by a rank-one extension of the base Cholesky factor.
#[derive(Debug, Clone)]
pub struct FantasyUpdate<'a> {
    base: &'a PosteriorState,
    x_new: Vec<f64>,
    y_new: f64,
    old_weights: Vec<f64>,
    new_weight: f64,
}

impl<'a> FantasyUpdate<'a> {
    pub fn new(base: &'a PosteriorState, x_new: &[f64], y_new: f64) -> Self {
        let hypers = base.hypers();
        let deterministic = fantasy_scale(base, x_new) == 0.0;
        let l = base.whiten(x_new);
        let d2 = (hypers.kernel.amplitude - l.iter().map(|v| v * v).sum::<f64>()).max(0.0)
            + hypers.noise_variance;
        if deterministic || d2 <= VARIANCE_CLAMP * hypers.kernel.amplitude {
            return Self {
                base,
                x_new: x_new.to_vec(),
                y_new,
                old_weights: base.weights().iter().copied().collect(),
                new_weight: 0.0,
            };
        }
        let z = base.whitened();
        let resid = y_new - hypers.mean.eval(x_new);
        let z_new = (resid - l.iter().zip(z.iter()).map(|(a, b)| a * b).sum::<f64>()) / d2.sqrt();
        let new_weight = z_new / d2.sqrt();
        let mut old: Vec<f64> = z.iter().zip(&l).map(|(zi, li)| zi - li * new_weight).collect();
        backward_solve(base.chol(), &mut old);
        Self { base, x_new: x_new.to_vec(), y_new, old_weights: old, new_weight }
    }

    pub fn x_new(&self) -> &[f64] {
        &self.x_new
    }

    pub fn y_new(&self) -> f64 {
        self.y_new
    }

    /// `mu_{n+1}(x)`
    pub fn mean(&self, x: &[f64]) -> f64 {
        let h = self.base.hypers();
        let mut m = h.mean.eval(x) + self.new_weight * h.kernel.value(&self.x_new, x);
        for (p, w) in self.base.data().points().iter().zip(&self.old_weights) {
            m += w * h.kernel.value(p, x);
        }
        m
    }

    /// Latent mean at the base observation `i` with the jitter treated as a nugget.
    pub fn mean_at_observation(&self, i: usize) -> f64 {
        self.mean(&self.base.data().points()[i]) + self.base.jitter() * self.old_weights[i]
    }

    pub fn mean_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let h = self.base.hypers();
        let mut m = h.mean.eval(x);
        let mut g = h.mean.gradient(x);
        let points = self.base.data().points().iter().zip(&self.old_weights);
        for (p, w) in points.chain(std::iter::once((&self.x_new, &self.new_weight))) {
            let (k, dk) = h.kernel.value_and_grad(p, x);
            m += w * k;
            for (gi, di) in g.iter_mut().zip(&dk) {
                *gi += w * di;
            }
        }
        (m, g)
    }
}

/// Where the maximum of the (fantasy) posterior mean is sought.
#[derive(Debug, Clone, PartialEq)]
pub enum InnerDomain {
    /// Local ascent inside the box from the current maximizer and the sampled point.
    Box(Bounds),
    /// Exhaustive maximum over a finite set; ties go to the lowest index.
    Grid(Vec<Vec<f64>>),
}

/// Stochastic-gradient estimate with per-coordinate standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub gradient: Vec<f64>,
    pub std_error: Vec<f64>,
    pub replications: usize,
    pub dropped: usize,
}

fn inner_config() -> AscentConfig {
    AscentConfig { restarts: 1, iterations: 60, convergence_tol: 1e-10, ..AscentConfig::default() }
}

/// Knowledge gradient of sampling one point, estimated by simulating the
/// fantasy observation, with IPA stochastic gradients.
#[derive(Debug, Clone)]
pub struct KnowledgeGradient<'a> {
    state: &'a PosteriorState,
    domain: InnerDomain,
    inner: AscentConfig,
    best_point: Vec<f64>,
    best_value: f64,
}

impl<'a> KnowledgeGradient<'a> {
    /// Locates `mu*_n` over `domain`; `config` sets the restarts for a box.
    pub fn new(state: &'a PosteriorState, domain: InnerDomain, config: &AscentConfig, rng: &mut Rng) -> Result<Self> {
        let (best_point, best_value) = match &domain {
            InnerDomain::Box(bounds) => {
                if bounds.dim() != state.dim() {
                    return Err(Error::invalid("inner bounds do not match the model dimension"));
                }
                let m = maximize_posterior_mean(state, bounds, config, rng)?;
                (m.argmax, m.value)
            }
            InnerDomain::Grid(points) => {
                if points.is_empty() {
                    return Err(Error::invalid("inner grid is empty"));
                }
                if points.iter().any(|p| p.len() != state.dim()) {
                    return Err(Error::invalid("inner grid point has the wrong dimension"));
                }
                let (i, v) = grid_argmax(points, |p| state.posterior_mean(p));
                (points[i].clone(), v)
            }
        };
        Ok(Self { state, domain, inner: inner_config(), best_point, best_value })
    }

    /// `(x*_n, mu*_n)`
    pub fn incumbent(&self) -> (&[f64], f64) {
        (&self.best_point, self.best_value)
    }

    fn fantasy_max(&self, f: &FantasyUpdate, x: &[f64]) -> Option<(Vec<f64>, f64)> {
        match &self.domain {
            InnerDomain::Grid(points) => {
                let (i, v) = grid_argmax(points, |p| f.mean(p));
                v.is_finite().then(|| (points[i].clone(), v))
            }
            InnerDomain::Box(bounds) => {
                let mut best: Option<(Vec<f64>, f64)> = None;
                for start in [self.best_point.clone(), bounds.project(x)] {
                    if let Ok(r) = local_gradient_ascent(|p| f.mean_grad(p), &start, bounds, &self.inner) {
                        if r.value.is_finite() && best.as_ref().is_none_or(|(_, b)| r.value > *b) {
                            best = Some((r.x, r.value));
                        }
                    }
                }
                best
            }
        }
    }

    /// One replication `mu*_{n+1} - mu*_n` for the standardized fantasy draw `z`.
    pub fn replicate(&self, x: &[f64], z: f64) -> Option<f64> {
        let s = fantasy_scale(self.state, x);
        if s == 0.0 {
            return Some(0.0);
        }
        let y = self.state.posterior_mean(x) + s * z;
        let f = FantasyUpdate::new(self.state, x, y);
        self.fantasy_max(&f, x).map(|(_, v)| v - self.best_value)
    }

    /// One stochastic gradient: the `x`-gradient of `mu_{n+1}(x^*)` with the
    /// fantasy maximizer `x^*` held fixed.
    pub fn replicate_gradient(&self, x: &[f64], z: f64) -> Option<Vec<f64>> {
        let d = x.len();
        let m = self.state.moments_with_grad(x);
        let noise = self.state.hypers().noise_variance;
        let (var, var_grad) = if m.variance > 0.0 { (m.variance, m.variance_grad) } else { (0.0, vec![0.0; d]) };
        let s2 = var + noise;
        if fantasy_scale(self.state, x) == 0.0 || s2 <= 0.0 {
            return Some(vec![0.0; d]);
        }
        let s = s2.sqrt();
        let f = FantasyUpdate::new(self.state, x, m.mean + s * z);
        let (x_star, _) = self.fantasy_max(&f, x)?;
        let (c, c_grad) = self.state.covariance_grad(&x_star, x);
        let g: Vec<f64> = (0..d)
            .map(|k| {
                let ds = var_grad[k] / (2.0 * s);
                z * (c_grad[k] / s - c * ds / s2)
            })
            .collect();
        g.iter().all(|v| v.is_finite()).then_some(g)
    }

    /// Mean and standard error of `j` replications.
    pub fn estimate(&self, x: &[f64], j: usize, rng: &mut Rng) -> Result<McEstimate> {
        if j < 2 {
            return Err(Error::invalid("knowledge gradient estimate needs J >= 2"));
        }
        self.check_point(x)?;
        let mut samples = Vec::with_capacity(j);
        let mut dropped = 0;
        for _ in 0..j {
            let z: f64 = StandardNormal.sample(rng);
            match self.replicate(x, z) {
                Some(v) => samples.push(v),
                None => dropped += 1,
            }
        }
        check_drops(dropped, j, "knowledge gradient")?;
        Ok(McEstimate::from_samples(&samples, dropped))
    }

    /// Average of `j` stochastic gradients.
    pub fn gradient_estimate(&self, x: &[f64], j: usize, rng: &mut Rng) -> Result<GradientEstimate> {
        if j == 0 {
            return Err(Error::invalid("knowledge gradient gradient needs J >= 1"));
        }
        self.check_point(x)?;
        let d = x.len();
        let mut per_coord: Vec<Vec<f64>> = vec![Vec::with_capacity(j); d];
        let mut dropped = 0;
        for _ in 0..j {
            let z: f64 = StandardNormal.sample(rng);
            match self.replicate_gradient(x, z) {
                Some(g) => {
                    for (k, v) in g.into_iter().enumerate() {
                        per_coord[k].push(v);
                    }
                }
                None => dropped += 1,
            }
        }
        check_drops(dropped, j, "knowledge gradient")?;
        let (gradient, std_error) = per_coord.iter().map(|s| mean_and_se(s)).unzip();
        Ok(GradientEstimate { gradient, std_error, replications: j - dropped, dropped })
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.state.dim() {
            return Err(Error::invalid("point dimension does not match the model"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("point has non-finite coordinates"));
        }
        Ok(())
    }
}

fn grid_argmax(points: &[Vec<f64>], f: impl Fn(&[f64]) -> f64) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, p) in points.iter().enumerate() {
        let v = f(p);
        if v > best.1 || (best.1 == f64::NEG_INFINITY && i == 0) {
            best = (i, v);
        }
    }
    best
}

/// Simulation estimate of the knowledge gradient at `x`.
pub fn kg_estimate(
    state: &PosteriorState,
    x: &[f64],
    j: usize,
    domain: InnerDomain,
    rng: &mut Rng,
) -> Result<McEstimate> {
    KnowledgeGradient::new(state, domain, &AscentConfig::default(), rng)?.estimate(x, j, rng)
}

/// Averaged unbiased stochastic gradient of the knowledge gradient at `x`.
pub fn kg_gradient_estimate(
    state: &PosteriorState,
    x: &[f64],
    j: usize,
    domain: InnerDomain,
    rng: &mut Rng,
) -> Result<GradientEstimate> {
    KnowledgeGradient::new(state, domain, &AscentConfig::default(), rng)?.gradient_estimate(x, j, rng)
}
