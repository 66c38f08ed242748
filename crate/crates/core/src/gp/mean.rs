use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Low-order polynomial basis functions for the parametric mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisFunction {
    /// `x_i`
    Coordinate(usize),
    /// `x_i^2`
    Square(usize),
    /// `x_i * x_j`
    Product(usize, usize),
}

impl BasisFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            BasisFunction::Coordinate(i) => x[i],
            BasisFunction::Square(i) => x[i] * x[i],
            BasisFunction::Product(i, j) => x[i] * x[j],
        }
    }

    fn add_gradient(&self, x: &[f64], scale: f64, grad: &mut [f64]) {
        match *self {
            BasisFunction::Coordinate(i) => grad[i] += scale,
            BasisFunction::Square(i) => grad[i] += 2.0 * scale * x[i],
            BasisFunction::Product(i, j) => {
                grad[i] += scale * x[j];
                grad[j] += scale * x[i];
            }
        }
    }

    fn max_index(&self) -> usize {
        match *self {
            BasisFunction::Coordinate(i) | BasisFunction::Square(i) => i,
            BasisFunction::Product(i, j) => i.max(j),
        }
    }
}

/// Prior mean `mu_0(x) = constant + sum_k basis_coefficients[k] * basis[k](x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSpec {
    pub constant: f64,
    #[serde(default)]
    pub basis_coefficients: Vec<f64>,
    #[serde(default)]
    pub basis: Vec<BasisFunction>,
}

impl MeanSpec {
    pub fn constant(value: f64) -> Self {
        Self { constant: value, basis_coefficients: Vec::new(), basis: Vec::new() }
    }

    pub fn with_basis(constant: f64, coefficients: Vec<f64>, basis: Vec<BasisFunction>) -> Result<Self> {
        let spec = Self { constant, basis_coefficients: coefficients, basis };
        if spec.basis.len() != spec.basis_coefficients.len() {
            return Err(Error::invalid("mean basis and coefficients differ in length"));
        }
        Ok(spec)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.basis.len() != self.basis_coefficients.len() {
            return Err(Error::invalid("mean basis and coefficients differ in length"));
        }
        if !self.constant.is_finite() || self.basis_coefficients.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("mean parameters must be finite"));
        }
        if self.basis.iter().any(|b| b.max_index() >= dim) {
            return Err(Error::invalid("mean basis refers to a coordinate beyond the dimension"));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant
            + self
                .basis_coefficients
                .iter()
                .zip(&self.basis)
                .map(|(b, psi)| b * psi.eval(x))
                .sum::<f64>()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        for (b, psi) in self.basis_coefficients.iter().zip(&self.basis) {
            psi.add_gradient(x, *b, &mut g);
        }
        g
    }
}

pub fn mean_eval(spec: &MeanSpec, x: &[f64]) -> f64 {
    spec.eval(x)
}
