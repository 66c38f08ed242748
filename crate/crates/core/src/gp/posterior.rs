//! Exact GP inference through a jittered Cholesky factorization.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::hyper::Hyperparameters;
use super::types::ObservationSet;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// First jitter tried, relative to the kernel amplitude.
pub const JITTER_START: f64 = 1e-6;
/// Largest jitter tried before giving up, relative to the kernel amplitude.
pub const JITTER_MAX: f64 = 1e-2;
/// Negative variances down to this fraction of the amplitude are roundoff and clamp to zero.
pub const VARIANCE_CLAMP: f64 = 1e-10;

/// Latent-function predictive moments at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Predictive {
    pub mean: f64,
    pub variance: f64,
}

impl Predictive {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Mean vector and covariance matrix of the posterior at several points.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPredictive {
    pub means: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

/// Posterior mean and variance with their gradients in `x`.
#[derive(Debug, Clone)]
pub struct Moments {
    pub mean: f64,
    /// Raw variance, possibly a tiny negative from roundoff.
    pub variance: f64,
    pub mean_grad: Vec<f64>,
    pub variance_grad: Vec<f64>,
}

/// A fitted Gaussian process: data, hyperparameters and the factorized
/// noise-augmented kernel matrix `K + (noise + jitter) I = L L^T`.
#[derive(Debug, Clone)]
pub struct PosteriorState {
    data: ObservationSet,
    hypers: Hyperparameters,
    chol: DMatrix<f64>,
    /// `L^{-1} (y - mu_0(X))`
    whitened: DVector<f64>,
    /// `(K + D)^{-1} (y - mu_0(X))`
    weights: DVector<f64>,
    jitter: f64,
}

pub(crate) fn kernel_matrix(points: &[Vec<f64>], hypers: &Hyperparameters) -> DMatrix<f64> {
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = hypers.kernel.amplitude;
        for j in 0..i {
            let v = hypers.kernel.value(&points[i], &points[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cholesky factor of `k + (noise + jitter) I`, escalating the jitter by
/// factors of ten from `JITTER_START` to `JITTER_MAX` times the amplitude.
pub(crate) fn factorize(k: &DMatrix<f64>, hypers: &Hyperparameters) -> Result<(DMatrix<f64>, f64)> {
    let scale = hypers.kernel.amplitude;
    let mut jitter = JITTER_START * scale;
    loop {
        let mut m = k.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += hypers.noise_variance + jitter;
        }
        if let Some(c) = nalgebra::Cholesky::new(m) {
            let l = c.unpack();
            if l.diagonal().iter().all(|d| *d > 0.0 && d.is_finite()) {
                return Ok((l, jitter));
            }
        }
        if jitter >= JITTER_MAX * scale * (1.0 - 1e-12) {
            return Err(Error::NumericalFailure {
                message: format!("kernel matrix not positive definite after jitter {jitter:e}"),
                jitter: Some(jitter),
            });
        }
        jitter *= 10.0;
    }
}

/// Solves `L z = b` in place for lower-triangular `L`.
pub(crate) fn forward_solve(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = b.len();
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= l[(i, j)] * b[j];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solves `L^T z = b` in place for lower-triangular `L`.
pub(crate) fn backward_solve(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = b.len();
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= l[(j, i)] * b[j];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Cholesky-like factor of a symmetric positive semi-definite matrix.
///
/// Pivots at or below `tol` are treated as exact zeros and their column is
/// zeroed, so rank-deficient covariances (duplicated points, zero variance)
/// factor without added jitter.
pub fn psd_factor(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= tol {
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    l
}

impl PosteriorState {
    /// Prior-only state (no observations).
    pub fn prior(hypers: Hyperparameters) -> Result<Self> {
        hypers.validate()?;
        let d = hypers.dim();
        let jitter = JITTER_START * hypers.kernel.amplitude;
        Ok(Self {
            data: ObservationSet::new(d),
            hypers,
            chol: DMatrix::zeros(0, 0),
            whitened: DVector::zeros(0),
            weights: DVector::zeros(0),
            jitter,
        })
    }

    fn build(data: ObservationSet, hypers: Hyperparameters) -> Result<Self> {
        if data.is_empty() {
            return Self::prior(hypers);
        }
        let k = kernel_matrix(data.points(), &hypers);
        let (chol, jitter) = factorize(&k, &hypers)?;
        let mut z: Vec<f64> = data
            .points()
            .iter()
            .zip(data.values())
            .map(|(x, y)| y - hypers.mean.eval(x))
            .collect();
        forward_solve(&chol, &mut z);
        let whitened = DVector::from_vec(z.clone());
        backward_solve(&chol, &mut z);
        Ok(Self { data, hypers, chol, whitened, weights: DVector::from_vec(z), jitter })
    }

    pub fn data(&self) -> &ObservationSet {
        &self.data
    }

    pub fn hypers(&self) -> &Hyperparameters {
        &self.hypers
    }

    /// Lower-triangular factor of the jittered, noise-augmented kernel matrix.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// `L^{-1} (y - mu_0(X))`
    pub fn whitened(&self) -> &DVector<f64> {
        &self.whitened
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.hypers.dim()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Same hyperparameters with one more observation appended.
    pub fn with_observation(&self, x: Vec<f64>, y: f64) -> Result<Self> {
        let mut data = self.data.clone();
        data.push(x, y)?;
        Self::build(data, self.hypers.clone())
    }

    /// `k(X, x)`
    pub fn cross_cov(&self, x: &[f64]) -> Vec<f64> {
        self.data.points().iter().map(|p| self.hypers.kernel.value(p, x)).collect()
    }

    /// `L^{-1} k(X, x)`
    pub fn whiten(&self, x: &[f64]) -> Vec<f64> {
        let mut v = self.cross_cov(x);
        forward_solve(&self.chol, &mut v);
        v
    }

    fn observed_index(&self, x: &[f64]) -> Option<usize> {
        self.data.points().iter().position(|p| p.as_slice() == x)
    }

    /// Whitened cross-covariance with the jitter treated as a nugget of the
    /// latent function, so an observed point sees its own column of the
    /// jittered matrix.
    fn whiten_nugget(&self, x: &[f64]) -> (Vec<f64>, Option<usize>) {
        let mut v = self.cross_cov(x);
        let idx = self.observed_index(x);
        if let Some(i) = idx {
            v[i] += self.jitter;
        }
        forward_solve(&self.chol, &mut v);
        (v, idx)
    }

    /// `(K + D)^{-1} b`
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut v = b.to_vec();
        forward_solve(&self.chol, &mut v);
        backward_solve(&self.chol, &mut v);
        v
    }

    pub fn posterior_mean(&self, x: &[f64]) -> f64 {
        let nugget = self.observed_index(x).map_or(0.0, |i| self.jitter * self.weights[i]);
        let prior = self.hypers.mean.eval(x) + nugget;
        prior
            + self
                .data
                .points()
                .iter()
                .zip(self.weights.iter())
                .map(|(p, w)| w * self.hypers.kernel.value(p, x))
                .sum::<f64>()
    }

    /// Posterior mean and its gradient.
    pub fn posterior_mean_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = self.hypers.mean.gradient(x);
        let mut mean = self.hypers.mean.eval(x);
        for (p, w) in self.data.points().iter().zip(self.weights.iter()) {
            let (k, g) = self.hypers.kernel.value_and_grad(p, x);
            mean += w * k;
            for (gi, dk) in grad.iter_mut().zip(&g) {
                *gi += w * dk;
            }
        }
        (mean, grad)
    }

    /// Posterior mean and raw (unclamped) variance.
    pub fn moments(&self, x: &[f64]) -> (f64, f64) {
        let (v, idx) = self.whiten_nugget(x);
        let prior = self.hypers.kernel.amplitude + idx.map_or(0.0, |_| self.jitter);
        let var = prior - v.iter().map(|a| a * a).sum::<f64>();
        (self.posterior_mean(x), var)
    }

    pub fn moments_with_grad(&self, x: &[f64]) -> Moments {
        let d = self.dim();
        let n = self.len();
        let mut kx = Vec::with_capacity(n);
        let mut dk = Vec::with_capacity(n);
        for p in self.data.points() {
            let (k, g) = self.hypers.kernel.value_and_grad(p, x);
            kx.push(k);
            dk.push(g);
        }
        let mut mean = self.hypers.mean.eval(x);
        let mut mean_grad = self.hypers.mean.gradient(x);
        for i in 0..n {
            mean += self.weights[i] * kx[i];
            for j in 0..d {
                mean_grad[j] += self.weights[i] * dk[i][j];
            }
        }
        let mut v = kx;
        forward_solve(&self.chol, &mut v);
        let variance = self.hypers.kernel.amplitude - v.iter().map(|a| a * a).sum::<f64>();
        backward_solve(&self.chol, &mut v);
        let mut variance_grad = vec![0.0; d];
        for i in 0..n {
            for j in 0..d {
                variance_grad[j] -= 2.0 * v[i] * dk[i][j];
            }
        }
        Moments { mean, variance, mean_grad, variance_grad }
    }

    /// Clamps roundoff-level negative variances; anything below
    /// `-VARIANCE_CLAMP * amplitude` is a numerical failure.
    pub fn clamp_variance(&self, var: f64) -> Result<f64> {
        if var >= 0.0 {
            Ok(var)
        } else if var >= -VARIANCE_CLAMP * self.hypers.kernel.amplitude {
            Ok(0.0)
        } else {
            Err(Error::numerical(format!("negative predictive variance {var:e}")))
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Predictive> {
        self.check_dim(x)?;
        let (mean, var) = self.moments(x);
        Ok(Predictive { mean, variance: self.clamp_variance(var)? })
    }

    /// Posterior covariance `Sigma_n(a, b)` of the latent function.
    pub fn covariance(&self, a: &[f64], b: &[f64]) -> f64 {
        let va = self.whiten(a);
        let vb = self.whiten(b);
        self.hypers.kernel.value(a, b) - va.iter().zip(&vb).map(|(p, q)| p * q).sum::<f64>()
    }

    /// `Sigma_n(a, x)` and its gradient in `x`, with `a` fixed.
    pub fn covariance_grad(&self, a: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
        let ua = self.solve(&self.cross_cov(a));
        let (k, mut grad) = self.hypers.kernel.value_and_grad(a, x);
        let mut value = k;
        for (i, p) in self.data.points().iter().enumerate() {
            let (kp, gp) = self.hypers.kernel.value_and_grad(p, x);
            value -= ua[i] * kp;
            for (g, dk) in grad.iter_mut().zip(&gp) {
                *g -= ua[i] * dk;
            }
        }
        (value, grad)
    }

    pub fn predict_joint(&self, xs: &[Vec<f64>]) -> Result<JointPredictive> {
        if xs.is_empty() {
            return Err(Error::invalid("predict_joint needs at least one point"));
        }
        for x in xs {
            self.check_dim(x)?;
        }
        let k = xs.len();
        let (whitened, idx): (Vec<Vec<f64>>, Vec<Option<usize>>) = xs.iter().map(|x| self.whiten_nugget(x)).unzip();
        let mut cov = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                let nugget = match (idx[i], idx[j]) {
                    (Some(a), Some(b)) if a == b => self.jitter,
                    _ => 0.0,
                };
                let prior = self.hypers.kernel.value(&xs[i], &xs[j]) + nugget;
                let reduction: f64 = whitened[i].iter().zip(&whitened[j]).map(|(a, b)| a * b).sum();
                let c = prior - reduction;
                cov[(i, j)] = c;
                cov[(j, i)] = c;
            }
        }
        for i in 0..k {
            cov[(i, i)] = self.clamp_variance(cov[(i, i)])?;
        }
        Ok(JointPredictive { means: xs.iter().map(|x| self.posterior_mean(x)).collect(), covariance: cov })
    }

    /// One joint draw of the latent function at `xs`.
    pub fn sample_joint(&self, xs: &[Vec<f64>], rng: &mut Rng) -> Result<Vec<f64>> {
        let joint = self.predict_joint(xs)?;
        let factor = psd_factor(&joint.covariance, 1e-14 * self.hypers.kernel.amplitude);
        Ok(draw(&joint.means, &factor, rng))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "point has dimension {}, model has {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Log density of the observed values under the prior plus noise.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.len() as f64;
        let quad: f64 = self.whitened.iter().map(|z| z * z).sum();
        let logdet: f64 = self.chol.diagonal().iter().map(|d| d.ln()).sum();
        -0.5 * quad - logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

/// `means + factor * z` for a fresh standard normal vector `z`.
pub(crate) fn draw(means: &[f64], factor: &DMatrix<f64>, rng: &mut Rng) -> Vec<f64> {
    let k = means.len();
    let z: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
    (0..k)
        .map(|i| means[i] + (0..=i).map(|j| factor[(i, j)] * z[j]).sum::<f64>())
        .collect()
}

/// Factorizes the noise-augmented kernel matrix and computes the centered weights.
pub fn fit_posterior(data: &ObservationSet, hypers: &Hyperparameters) -> Result<PosteriorState> {
    if data.is_empty() {
        return Err(Error::invalid("fit_posterior needs at least one observation"));
    }
    hypers.validate()?;
    if data.dim() != hypers.dim() {
        return Err(Error::invalid(format!(
            "data dimension {} does not match kernel dimension {}",
            data.dim(),
            hypers.dim()
        )));
    }
    PosteriorState::build(data.clone(), hypers.clone())
}

pub fn predict(state: &PosteriorState, x: &[f64]) -> Result<Predictive> {
    state.predict(x)
}

pub fn predict_joint(state: &PosteriorState, xs: &[Vec<f64>]) -> Result<JointPredictive> {
    state.predict_joint(xs)
}

pub fn sample_joint(state: &PosteriorState, xs: &[Vec<f64>], rng: &mut Rng) -> Result<Vec<f64>> {
    state.sample_joint(xs, rng)
}

pub fn log_marginal_likelihood(data: &ObservationSet, hypers: &Hyperparameters) -> Result<f64> {
    Ok(fit_posterior(data, hypers)?.log_marginal_likelihood())
}
