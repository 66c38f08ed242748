//! Standard normal density, distribution and quantile functions.

use statrs::distribution::{ContinuousCDF, Normal};
use libm::erfc;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

pub fn cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// `z Phi(z) + phi(z)`, the expected positive part `E[(z + Z)^+]`.
pub fn expected_positive_part(z: f64) -> f64 {
    z * cdf(z) + pdf(z)
}
