//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use bayesopt::gp::{Hyperparameters, KernelFamily, KernelSpec, MeanSpec, ObservationSet, PosteriorState};
use bayesopt::rng::Rng;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;

/// Conditional-Gaussian formulas evaluated with an explicit LU inverse of the
/// jittered, noise-augmented kernel matrix.
pub struct DenseOracle {
    points: Vec<Vec<f64>>,
    hypers: Hyperparameters,
    kinv: DMatrix<f64>,
    resid: DVector<f64>,
    log_det: f64,
}

impl DenseOracle {
    pub fn new(state: &PosteriorState) -> Self {
        let h = state.hypers().clone();
        let pts = state.data().points().to_vec();
        let n = pts.len();
        let k = DMatrix::from_fn(n, n, |i, j| {
            h.kernel.value(&pts[i], &pts[j]) + if i == j { h.noise_variance + state.jitter() } else { 0.0 }
        });
        let lu = k.clone().lu();
        let log_det = lu.determinant().ln();
        let kinv = lu.try_inverse().expect("kernel matrix is invertible");
        let resid = DVector::from_iterator(n, pts.iter().zip(state.data().values()).map(|(x, y)| y - h.mean.eval(x)));
        Self { points: pts, hypers: h, kinv, resid, log_det }
    }

    fn cross(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.points.len(), self.points.iter().map(|p| self.hypers.kernel.value(p, x)))
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        self.hypers.mean.eval(x) + self.cross(x).dot(&(&self.kinv * &self.resid))
    }

    pub fn cov(&self, a: &[f64], b: &[f64]) -> f64 {
        let ka = self.cross(a);
        let kb = self.cross(b);
        self.hypers.kernel.value(a, b) - ka.dot(&(&self.kinv * kb))
    }

    pub fn lml(&self) -> f64 {
        let n = self.points.len() as f64;
        -0.5 * self.resid.dot(&(&self.kinv * &self.resid)) - 0.5 * self.log_det
            - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Nodes and weights for `E[g(Z)]`, `Z ~ N(0, 1)`, by the Golub-Welsch
/// eigenproblem of the probabilists' Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let j = DMatrix::from_fn(n, n, |r, c| {
        if r + 1 == c || c + 1 == r {
            (r.max(c) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> =
        (0..n).map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

pub const FAMILIES: [KernelFamily; 4] = [
    KernelFamily::PowerExponential,
    KernelFamily::Matern12,
    KernelFamily::Matern32,
    KernelFamily::Matern52,
];

/// Random hyperparameters of moderate scale.
pub fn random_hypers(rng: &mut Rng, d: usize, family: KernelFamily, noise: f64) -> Hyperparameters {
    let amp = rng.random_range(0.5..2.0);
    let inv: Vec<f64> = (0..d).map(|_| rng.random_range(1.0..10.0)).collect();
    Hyperparameters::new(
        KernelSpec::new(family, amp, inv).unwrap(),
        MeanSpec::constant(rng.random_range(-1.0..1.0)),
        noise,
    )
    .unwrap()
}

/// `n` uniform points on the unit cube with values from a smooth function.
pub fn random_data(rng: &mut Rng, d: usize, n: usize) -> ObservationSet {
    let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    let ys = pts.iter().map(|p| p.iter().enumerate().map(|(i, v)| ((i + 2) as f64 * v).sin()).sum::<f64>() + rng.random_range(-0.3..0.3)).collect();
    ObservationSet::from_parts(d, pts, ys).unwrap()
}

pub fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / b.abs().max(scale)
}

pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}
