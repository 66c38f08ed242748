use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Axis-aligned box `{x : lower[i] <= x[i] <= upper[i]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoundsRepr")]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Deserialize)]
struct BoundsRepr {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<BoundsRepr> for Bounds {
    type Error = Error;
    fn try_from(r: BoundsRepr) -> Result<Self> {
        Bounds::new(r.lower, r.upper)
    }
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::invalid("bounds must have dimension >= 1"));
        }
        if lower.len() != upper.len() {
            return Err(Error::invalid(format!(
                "bounds dimension mismatch: {} lower vs {} upper",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::invalid(format!(
                    "bounds[{i}]: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit cube `[0, 1]^d`.
    pub fn unit(d: usize) -> Result<Self> {
        Self::new(vec![0.0; d], vec![1.0; d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn diagonal(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i).powi(2)).sum::<f64>().sqrt()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn check_contains(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "point has dimension {}, bounds have {}",
                x.len(),
                self.dim()
            )));
        }
        if !self.contains(x) {
            return Err(Error::invalid(format!("point {x:?} lies outside the bounds")));
        }
        Ok(())
    }

    /// Coordinatewise clamp onto the box.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| v.clamp(*l, *u))
            .collect()
    }

    pub fn sample_uniform(&self, rng: &mut Rng) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l + (u - l) * rng.random::<f64>())
            .collect()
    }
}

/// Evaluated points `x_{1:n}` and their observed values `y_{1:n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObservationRepr")]
pub struct ObservationSet {
    dim: usize,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct ObservationRepr {
    dim: usize,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl TryFrom<ObservationRepr> for ObservationSet {
    type Error = Error;
    fn try_from(r: ObservationRepr) -> Result<Self> {
        let mut set = ObservationSet::new(r.dim);
        if r.points.len() != r.values.len() {
            return Err(Error::invalid("observation points and values differ in length"));
        }
        for (x, y) in r.points.into_iter().zip(r.values) {
            set.push(x, y)?;
        }
        Ok(set)
    }
}

impl ObservationSet {
    pub fn new(dim: usize) -> Self {
        Self { dim, points: Vec::new(), values: Vec::new() }
    }

    pub fn from_parts(dim: usize, points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        ObservationSet::try_from(ObservationRepr { dim, points, values })
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "observation has dimension {}, expected {}",
                x.len(),
                self.dim
            )));
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("observations must be finite"));
        }
        self.points.push(x);
        self.values.push(y);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index and value of the largest observation; ties go to the earliest index.
    pub fn best(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &y) in self.values.iter().enumerate() {
            if best.is_none_or(|(_, b)| y > b) {
                best = Some((i, y));
            }
        }
        best
    }

    pub fn mean_value(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.values.iter().sum::<f64>() / self.len() as f64)
    }

    pub fn min_value(&self) -> Option<f64> {
        self.values.iter().copied().reduce(f64::min)
    }
}
