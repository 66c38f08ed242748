//! Maximizers over the feasible box: projected gradient ascent with
//! backtracking, deterministic multistart, and multistart stochastic
//! gradient ascent with a decreasing step size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::Bounds;
use crate::rng::{self, Rng};

const ARMIJO: f64 = 1e-4;
const INITIAL_STEP_FRACTION: f64 = 0.1;
const SGA_TAG: u64 = 0x5347_4100;
const SGA_EVAL_TAG: u64 = 0x5347_4101;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AscentConfig {
    /// Number of starts `R`.
    pub restarts: usize,
    /// Iterations per start `T`.
    pub iterations: usize,
    /// Step-size constant `a` in `a / (a + t)`.
    pub step_constant: f64,
    /// Replications used to rank the final stochastic-ascent candidates.
    pub eval_replications: usize,
    pub max_line_search_steps: usize,
    /// Projected-gradient norm below which deterministic ascent stops.
    pub convergence_tol: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            iterations: 100,
            step_constant: 4.0,
            eval_replications: 1000,
            max_line_search_steps: 40,
            convergence_tol: 1e-8,
        }
    }
}

impl AscentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.iterations == 0 {
            return Err(Error::invalid("ascent needs at least one restart and one iteration"));
        }
        if !(self.step_constant > 0.0) {
            return Err(Error::invalid("step constant must be > 0"));
        }
        if self.eval_replications == 0 {
            return Err(Error::invalid("eval_replications must be >= 1"));
        }
        Ok(())
    }

    /// `a / (a + t)` for iteration `t >= 1`.
    pub fn step_size(&self, t: usize) -> f64 {
        self.step_constant / (self.step_constant + t as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximizerResult {
    pub argmax: Vec<f64>,
    pub value: f64,
    /// Final value per restart; `NaN` marks an aborted restart.
    pub restarts_summary: Vec<f64>,
    pub evaluations_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalAscent {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
}

pub fn project_to_bounds(x: &[f64], bounds: &Bounds) -> Result<Vec<f64>> {
    if x.len() != bounds.dim() {
        return Err(Error::invalid(format!(
            "point has dimension {}, bounds have {}",
            x.len(),
            bounds.dim()
        )));
    }
    Ok(bounds.project(x))
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|g| g.is_finite())
}

/// Projected steepest ascent with a backtracking Armijo line search.
///
/// Steps move along the normalized projected gradient. The first trial step
/// is a tenth of the box diagonal, later trials start from twice the last
/// accepted step. Rejected trials (including non-finite values) halve the
/// step. Accepted iterates never decrease the objective.
pub fn local_gradient_ascent<F>(
    mut objective: F,
    x0: &[f64],
    bounds: &Bounds,
    config: &AscentConfig,
) -> Result<LocalAscent>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = project_to_bounds(x0, bounds)?;
    let (mut fx, mut g) = objective(&x);
    let mut evaluations = 1;
    if !fx.is_finite() || !all_finite(&g) {
        return Err(Error::numerical(format!("objective is not finite at start point {x:?}")));
    }
    let max_step = INITIAL_STEP_FRACTION * bounds.diagonal();
    let mut step = max_step;
    let mut iterations = 0;
    let (lo, hi) = (bounds.lower(), bounds.upper());

    while iterations < config.iterations {
        let pg: Vec<f64> = (0..x.len())
            .map(|i| {
                let blocked = (x[i] <= lo[i] && g[i] < 0.0) || (x[i] >= hi[i] && g[i] > 0.0);
                if blocked {
                    0.0
                } else {
                    g[i]
                }
            })
            .collect();
        let norm = pg.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < config.convergence_tol {
            break;
        }
        iterations += 1;

        let mut trial = step;
        let mut accepted = false;
        for _ in 0..config.max_line_search_steps {
            let xn: Vec<f64> = x
                .iter()
                .zip(&pg)
                .map(|(xi, gi)| xi + trial * gi / norm)
                .collect();
            let xn = bounds.project(&xn);
            if xn == x {
                break;
            }
            let (fn_, gn) = objective(&xn);
            evaluations += 1;
            let predicted: f64 = g.iter().zip(xn.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum();
            if fn_.is_finite() && all_finite(&gn) && fn_ >= fx + ARMIJO * predicted {
                x = xn;
                fx = fn_;
                g = gn;
                step = (2.0 * trial).min(max_step);
                accepted = true;
                break;
            }
            trial *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(LocalAscent { x, value: fx, evaluations, iterations })
}

/// Local ascents from `R` uniform starts plus the supplied anchor points
/// (typically the best evaluated point); returns the best final iterate.
pub fn multistart_deterministic<F>(
    mut objective: F,
    bounds: &Bounds,
    config: &AscentConfig,
    anchors: &[Vec<f64>],
    rng: &mut Rng,
) -> Result<MaximizerResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    config.validate()?;
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(config.restarts + anchors.len());
    for _ in 0..config.restarts {
        starts.push(bounds.sample_uniform(rng));
    }
    for a in anchors {
        starts.push(project_to_bounds(a, bounds)?);
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut summary = Vec::with_capacity(starts.len());
    let mut evaluations = 0;
    for s in &starts {
        match local_gradient_ascent(&mut objective, s, bounds, config) {
            Ok(res) => {
                evaluations += res.evaluations;
                summary.push(res.value);
                if best.as_ref().is_none_or(|(_, v)| res.value > *v) {
                    best = Some((res.x, res.value));
                }
            }
            Err(_) => {
                evaluations += 1;
                summary.push(f64::NAN);
            }
        }
    }
    let (argmax, value) =
        best.ok_or_else(|| Error::numerical("every multistart restart aborted on a non-finite objective"))?;
    Ok(MaximizerResult { argmax, value, restarts_summary: summary, evaluations_used: evaluations })
}

/// Multistart stochastic gradient ascent.
///
/// Each of the `R` starts is drawn uniformly from the box and iterated
/// `x_t = project(x_{t-1} + a/(a+t) * G)` for `T` steps, where `G` comes from
/// `gradient`. Final iterates are ranked by `value` (called with the same
/// random stream for every candidate) and the best is returned. Up to `R - 1`
/// failing restarts are tolerated.
pub fn multistart_sga<G, V>(
    mut gradient: G,
    mut value: V,
    bounds: &Bounds,
    config: &AscentConfig,
    rng: &mut Rng,
) -> Result<MaximizerResult>
where
    G: FnMut(&[f64], &mut Rng) -> Result<Vec<f64>>,
    V: FnMut(&[f64], &mut Rng) -> Result<f64>,
{
    config.validate()?;
    let root = rng::next_seed(rng);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut summary = Vec::with_capacity(config.restarts);
    let mut evaluations = 0;
    let mut last_error = None;
    for r in 0..config.restarts {
        let mut stream = rng::substream(root, SGA_TAG, r as u64);
        let mut x = bounds.sample_uniform(&mut stream);
        let run = (|| -> Result<f64> {
            for t in 1..=config.iterations {
                let g = gradient(&x, &mut stream)?;
                evaluations += 1;
                if !all_finite(&g) {
                    return Err(Error::numerical("stochastic gradient is not finite"));
                }
                let alpha = config.step_size(t);
                let stepped: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + alpha * gi).collect();
                x = bounds.project(&stepped);
            }
            let mut eval_stream = rng::substream(root, SGA_EVAL_TAG, 0);
            evaluations += 1;
            value(&x, &mut eval_stream)
        })();
        match run {
            Ok(v) if v.is_finite() => {
                summary.push(v);
                if best.as_ref().is_none_or(|(_, b)| v > *b) {
                    best = Some((x.clone(), v));
                }
            }
            Ok(_) => summary.push(f64::NAN),
            Err(e) => {
                summary.push(f64::NAN);
                last_error = Some(e);
            }
        }
    }
    match best {
        Some((argmax, value)) => {
            Ok(MaximizerResult { argmax, value, restarts_summary: summary, evaluations_used: evaluations })
        }
        None => Err(last_error
            .unwrap_or_else(|| Error::numerical("no stochastic-ascent restart produced a finite value"))
            .context("all stochastic gradient restarts failed")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn quadratic(c: Vec<f64>) -> impl FnMut(&[f64]) -> (f64, Vec<f64>) {
        move |x: &[f64]| {
            let v = -x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let g = x.iter().zip(&c).map(|(a, b)| -2.0 * (a - b)).collect();
            (v, g)
        }
    }

    #[test]
    fn projection_cases() {
        let b = Bounds::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(project_to_bounds(&[0.5, 1.0], &b).unwrap(), vec![0.5, 1.0]);
        assert_eq!(project_to_bounds(&[-1.0, 1.0], &b).unwrap(), vec![0.0, 1.0]);
        assert_eq!(project_to_bounds(&[5.0, 5.0], &b).unwrap(), vec![1.0, 2.0]);
        assert!(project_to_bounds(&[5.0], &b).is_err());
    }

    #[test]
    fn interior_quadratic_optimum() {
        let b = Bounds::new(vec![-1.0, -1.0], vec![2.0, 2.0]).unwrap();
        let c = vec![0.3, 1.1];
        let r = local_gradient_ascent(quadratic(c.clone()), &[-1.0, 2.0], &b, &AscentConfig::default())
            .unwrap();
        for i in 0..2 {
            assert!((r.x[i] - c[i]).abs() <= 1e-6 * b.width(i), "{:?}", r.x);
        }
    }

    #[test]
    fn exterior_quadratic_optimum_is_projected() {
        let b = Bounds::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let c = vec![1.7, -0.4];
        let r = local_gradient_ascent(quadratic(c.clone()), &[0.5, 0.5], &b, &AscentConfig::default())
            .unwrap();
        let target = b.project(&c);
        for i in 0..2 {
            assert!((r.x[i] - target[i]).abs() <= 1e-6);
        }
    }

    #[test]
    fn linear_objective_reaches_upper_corner() {
        let b = Bounds::new(vec![0.0, -2.0, 1.0], vec![1.0, 3.0, 4.0]).unwrap();
        let f = |x: &[f64]| (x.iter().sum::<f64>(), vec![1.0; 3]);
        let r = local_gradient_ascent(f, &[0.5, 0.0, 2.0], &b, &AscentConfig::default()).unwrap();
        assert_eq!(r.x, b.upper().to_vec());
    }

    #[test]
    fn non_finite_start_aborts() {
        let b = Bounds::unit(1).unwrap();
        let f = |_: &[f64]| (f64::NAN, vec![0.0]);
        assert!(matches!(
            local_gradient_ascent(f, &[0.5], &b, &AscentConfig::default()),
            Err(Error::NumericalFailure { .. })
        ));
        let mut rng = seeded(0);
        assert!(multistart_deterministic(f, &b, &AscentConfig::default(), &[], &mut rng).is_err());
    }

    #[test]
    fn ascent_never_decreases_from_start() {
        let b = Bounds::new(vec![-3.0], vec![3.0]).unwrap();
        let f = |x: &[f64]| {
            let v = (3.0 * x[0]).sin() + 0.1 * x[0];
            (v, vec![3.0 * (3.0 * x[0]).cos() + 0.1])
        };
        for start in [-2.9, -1.0, 0.0, 0.7, 2.5] {
            let res = local_gradient_ascent(f, &[start], &b, &AscentConfig::default()).unwrap();
            assert!(res.value >= f(&[start]).0);
            assert!(res.value <= 1.0 + 0.3 + 1e-12);
        }
    }

    #[test]
    fn alg3_step_sizes() {
        let c = AscentConfig::default();
        assert_eq!((c.restarts, c.iterations, c.eval_replications), (10, 100, 1000));
        assert_eq!(c.step_size(1), 0.8);
        assert_eq!(c.step_size(10), 4.0 / 14.0);
    }

    #[test]
    fn sga_on_exact_quadratic_gradient() {
        let b = Bounds::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let c = [0.35, 0.6];
        let grad = |x: &[f64], _: &mut Rng| Ok(x.iter().zip(&c).map(|(a, b)| -2.0 * (a - b)).collect());
        let value = |x: &[f64], _: &mut Rng| Ok(-x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>());
        let cfg = AscentConfig { restarts: 3, ..AscentConfig::default() };
        let r = multistart_sga(grad, value, &b, &cfg, &mut seeded(3)).unwrap();
        for i in 0..2 {
            assert!((r.argmax[i] - c[i]).abs() < 1e-2);
        }
    }

    #[test]
    fn sga_tolerates_partial_failures() {
        let b = Bounds::unit(1).unwrap();
        let mut calls = 0;
        let grad = |_: &[f64], _: &mut Rng| {
            calls += 1;
            if calls == 1 {
                Err(Error::numerical("boom"))
            } else {
                Ok(vec![1.0])
            }
        };
        let value = |x: &[f64], _: &mut Rng| Ok(x[0]);
        let cfg = AscentConfig { restarts: 2, iterations: 5, ..AscentConfig::default() };
        let r = multistart_sga(grad, value, &b, &cfg, &mut seeded(1)).unwrap();
        assert!(r.restarts_summary[0].is_nan());
        assert_eq!(r.argmax, vec![1.0]);
    }

    #[test]
    fn multistart_is_reproducible() {
        let b = Bounds::new(vec![-3.0], vec![3.0]).unwrap();
        let f = |x: &[f64]| ((3.0 * x[0]).sin(), vec![3.0 * (3.0 * x[0]).cos()]);
        let cfg = AscentConfig { restarts: 1, ..AscentConfig::default() };
        let a = multistart_deterministic(f, &b, &cfg, &[], &mut seeded(9)).unwrap();
        let c = multistart_deterministic(f, &b, &cfg, &[], &mut seeded(9)).unwrap();
        assert_eq!(a, c);
    }
}
