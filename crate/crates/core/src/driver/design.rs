use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::Bounds;
use crate::rng::Rng;

/// Space-filling initial design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignMethod {
    /// Independent uniform points.
    Uniform,
    /// One point per equal-width stratum in every coordinate, strata permuted independently.
    #[default]
    LatinHypercube,
}

pub fn initial_design(n0: usize, bounds: &Bounds, method: DesignMethod, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
    if n0 == 0 {
        return Err(Error::invalid("initial design size must be >= 1"));
    }
    let d = bounds.dim();
    match method {
        DesignMethod::Uniform => Ok((0..n0).map(|_| bounds.sample_uniform(rng)).collect()),
        DesignMethod::LatinHypercube => {
            let mut pts = vec![vec![0.0; d]; n0];
            for i in 0..d {
                let mut strata: Vec<usize> = (0..n0).collect();
                strata.shuffle(rng);
                for (p, s) in pts.iter_mut().zip(strata) {
                    let u: f64 = rng.random();
                    let v = bounds.lower()[i] + bounds.width(i) * (s as f64 + u) / n0 as f64;
                    p[i] = v.min(bounds.upper()[i]);
                }
            }
            Ok(pts)
        }
    }
}
