//! Synthetic objectives, brute-force grid oracles and head-to-head policy
//! comparison. All functions are in maximization form.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::acqopt::{local_gradient_ascent, AscentConfig};
use crate::driver::{try_run_loop, LoopConfig, NoiseSimulator};
use crate::error::{Error, Result};
use crate::gp::{Bounds, Hyperparameters, PosteriorState};
use crate::rng::{self, Rng};

const COMPARE_TAG: u64 = 0x434d_5000;
const RANDOM_TAG: u64 = 0x434d_5001;

/// Name of the uniform random-search baseline in comparison output.
pub const RANDOM_SEARCH: &str = "random-search";

/// Names accepted by [`eval_test_function`].
pub const TEST_FUNCTIONS: [&str; 4] = ["sinus-1d", "branin-2d", "sphere-2", "sphere-6"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum FunctionKind {
    /// `sin(3x) + x`.
    Sinus,
    /// Negated Branin.
    Branin,
    /// `-sum (x_i - 0.5)^2`.
    Sphere,
    /// Multilinear interpolation of values on a tensor grid with `resolution`
    /// nodes per axis, first coordinate slowest.
    Interpolated { resolution: usize, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub name: String,
    pub bounds: Bounds,
    pub kind: FunctionKind,
}

/// Grid maximum of a test function, polished by local ascent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOptimum {
    pub name: String,
    /// Grid nodes per dimension.
    pub resolution: usize,
    pub x: Vec<f64>,
    pub value: f64,
}

const BRANIN_B: f64 = 5.1 / (4.0 * PI * PI);
const BRANIN_C: f64 = 5.0 / PI;
const BRANIN_T: f64 = 1.0 / (8.0 * PI);

impl TestFunction {
    pub fn by_name(name: &str) -> Result<Self> {
        let (bounds, kind) = match name {
            "sinus-1d" => (Bounds::new(vec![0.0], vec![4.0])?, FunctionKind::Sinus),
            "branin-2d" => (Bounds::new(vec![-5.0, 0.0], vec![10.0, 15.0])?, FunctionKind::Branin),
            "sphere-2" => (Bounds::unit(2)?, FunctionKind::Sphere),
            "sphere-6" => (Bounds::unit(6)?, FunctionKind::Sphere),
            other => {
                return Err(Error::invalid(format!(
                    "unknown test function {other:?} (expected one of {})",
                    TEST_FUNCTIONS.join(", ")
                )))
            }
        };
        Ok(Self { name: name.into(), bounds, kind })
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.bounds.check_contains(x)?;
        Ok(self.value_grad(x).0)
    }

    /// Value and gradient; finite differences for interpolated functions.
    pub fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        match &self.kind {
            FunctionKind::Sinus => ((3.0 * x[0]).sin() + x[0], vec![3.0 * (3.0 * x[0]).cos() + 1.0]),
            FunctionKind::Branin => {
                let (x1, x2) = (x[0], x[1]);
                let inner = x2 - BRANIN_B * x1 * x1 + BRANIN_C * x1 - 6.0;
                let f = inner * inner + 10.0 * (1.0 - BRANIN_T) * x1.cos() + 10.0;
                let d1 = 2.0 * inner * (BRANIN_C - 2.0 * BRANIN_B * x1) - 10.0 * (1.0 - BRANIN_T) * x1.sin();
                (-f, vec![-d1, -2.0 * inner])
            }
            FunctionKind::Sphere => (
                -x.iter().map(|v| (v - 0.5).powi(2)).sum::<f64>(),
                x.iter().map(|v| -2.0 * (v - 0.5)).collect(),
            ),
            FunctionKind::Interpolated { resolution, values } => {
                let f = interpolate(&self.bounds, *resolution, values, x);
                let g = (0..x.len())
                    .map(|i| {
                        let h = 1e-6 * self.bounds.width(i);
                        let mut hi = x.to_vec();
                        let mut lo = x.to_vec();
                        hi[i] = (x[i] + h).min(self.bounds.upper()[i]);
                        lo[i] = (x[i] - h).max(self.bounds.lower()[i]);
                        let fh = interpolate(&self.bounds, *resolution, values, &hi);
                        let fl = interpolate(&self.bounds, *resolution, values, &lo);
                        (fh - fl) / (hi[i] - lo[i])
                    })
                    .collect();
                (f, g)
            }
        }
    }

    /// Exhaustive grid maximum followed by a local-ascent polish.
    pub fn oracle_optimum(&self, resolution: usize) -> Result<OracleOptimum> {
        let d = self.dim();
        if resolution < 10 {
            return Err(Error::invalid("oracle grid needs at least 10 points per dimension"));
        }
        if d > 3 {
            return Err(Error::invalid(format!("full oracle grid not supported in {d} dimensions")));
        }
        let node = |i: usize, k: usize| {
            self.bounds.lower()[i] + self.bounds.width(i) * k as f64 / (resolution - 1) as f64
        };
        let mut idx = vec![0usize; d];
        let mut x = vec![0.0; d];
        let mut best: Option<(Vec<f64>, f64)> = None;
        'grid: loop {
            for i in 0..d {
                x[i] = node(i, idx[i]);
            }
            let v = self.value_grad(&x).0;
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some((x.clone(), v));
            }
            let mut pos = d;
            loop {
                if pos == 0 {
                    break 'grid;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < resolution {
                    break;
                }
                idx[pos] = 0;
            }
        }
        let (mut bx, mut bv) = best.expect("grid is nonempty");
        let cfg = AscentConfig { iterations: 500, convergence_tol: 1e-12, max_line_search_steps: 60, ..Default::default() };
        if let Ok(p) = local_gradient_ascent(|x| self.value_grad(x), &bx, &self.bounds, &cfg) {
            if p.value > bv {
                bx = p.x;
                bv = p.value;
            }
        }
        Ok(OracleOptimum { name: self.name.clone(), resolution, x: bx, value: bv })
    }
}

fn interpolate(bounds: &Bounds, resolution: usize, values: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    let mut base = vec![0usize; d];
    let mut frac = vec![0.0; d];
    for i in 0..d {
        let t = ((x[i] - bounds.lower()[i]) / bounds.width(i)).clamp(0.0, 1.0) * (resolution - 1) as f64;
        let k = (t.floor() as usize).min(resolution - 2);
        base[i] = k;
        frac[i] = t - k as f64;
    }
    let mut total = 0.0;
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut flat = 0;
        for i in 0..d {
            let up = (corner >> (d - 1 - i)) & 1;
            w *= if up == 1 { frac[i] } else { 1.0 - frac[i] };
            flat = flat * resolution + base[i] + up;
        }
        if w != 0.0 {
            total += w * values[flat];
        }
    }
    total
}

pub fn eval_test_function(name: &str, x: &[f64]) -> Result<f64> {
    TestFunction::by_name(name)?.eval(x)
}

/// [`TestFunction::oracle_optimum`] for a named function, cached per
/// `(name, resolution)` for the life of the process.
pub fn grid_oracle_optimum(name: &str, resolution: usize) -> Result<OracleOptimum> {
    static CACHE: OnceLock<Mutex<HashMap<(String, usize), OracleOptimum>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (name.to_string(), resolution);
    if let Some(hit) = cache.lock().expect("oracle cache poisoned").get(&key) {
        return Ok(hit.clone());
    }
    let opt = TestFunction::by_name(name)?.oracle_optimum(resolution)?;
    cache.lock().expect("oracle cache poisoned").insert(key, opt.clone());
    Ok(opt)
}

/// One draw from the GP prior on a tensor grid with `resolution` nodes per
/// axis, interpolated multilinearly between nodes.
pub fn sample_gp_objective(
    hypers: &Hyperparameters,
    bounds: &Bounds,
    resolution: usize,
    rng: &mut Rng,
) -> Result<TestFunction> {
    let d = bounds.dim();
    if d > 2 {
        return Err(Error::invalid("sampled objectives support at most 2 dimensions"));
    }
    if hypers.dim() != d {
        return Err(Error::invalid("hyperparameters do not match the bounds dimension"));
    }
    if resolution < 2 {
        return Err(Error::invalid("sampled objectives need at least 2 grid nodes per axis"));
    }
    let axis = |i: usize, k: usize| bounds.lower()[i] + bounds.width(i) * k as f64 / (resolution - 1) as f64;
    let grid: Vec<Vec<f64>> = if d == 1 {
        (0..resolution).map(|k| vec![axis(0, k)]).collect()
    } else {
        (0..resolution * resolution).map(|k| vec![axis(0, k / resolution), axis(1, k % resolution)]).collect()
    };
    let values = PosteriorState::prior(hypers.clone())?.sample_joint(&grid, rng)?;
    Ok(TestFunction {
        name: "gp-sample".into(),
        bounds: bounds.clone(),
        kind: FunctionKind::Interpolated { resolution, values },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub policy: String,
    pub seed: u64,
    pub n: usize,
    /// Best noise-free objective value among the first `n` evaluated points.
    pub best_value: f64,
}

/// Per-iteration quartiles of best-so-far across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub n: Vec<usize>,
    pub q25: Vec<f64>,
    pub median: Vec<f64>,
    pub q75: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub summary: BTreeMap<String, PolicySummary>,
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("policy,seed,n,best_value\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.policy, r.seed, r.n, r.best_value));
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }

    /// Final best value for each seed of `policy`, in seed order.
    pub fn final_best(&self, policy: &str) -> Vec<f64> {
        let mut last: BTreeMap<u64, (usize, f64)> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.policy == policy) {
            let e = last.entry(r.seed).or_insert((0, f64::NEG_INFINITY));
            if r.n >= e.0 {
                *e = (r.n, r.best_value);
            }
        }
        last.into_values().map(|(_, v)| v).collect()
    }
}

/// Linearly interpolated sample quantile, `p` in `[0, 1]`.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let h = p * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

fn best_so_far(objective: &(impl Fn(&[f64]) -> f64 + ?Sized), xs: impl Iterator<Item = Vec<f64>>) -> Vec<f64> {
    let mut best = f64::NEG_INFINITY;
    xs.map(|x| {
        best = best.max(objective(&x));
        best
    })
    .collect()
}

/// Runs every policy for `seeds` seeds plus a uniform random-search baseline
/// with the largest policy budget. Seed `s` of a policy runs with the seed
/// derived from the policy's own seed and `s`; cells run on separate threads.
pub fn compare_policies<F>(
    policies: &[(String, LoopConfig)],
    objective: F,
    seeds: usize,
    noise: Option<NoiseSimulator>,
) -> Result<Comparison>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if policies.is_empty() {
        return Err(Error::invalid("need at least one policy"));
    }
    if seeds < 2 {
        return Err(Error::invalid("need at least two seeds"));
    }
    if policies.iter().any(|(name, _)| name == RANDOM_SEARCH) {
        return Err(Error::invalid(format!("policy name {RANDOM_SEARCH:?} is reserved for the baseline")));
    }
    for (_, c) in policies {
        c.validate()?;
    }
    let bounds = policies[0].1.bounds.clone();
    let budget = policies.iter().map(|(_, c)| c.budget).max().expect("nonempty");
    let base_seed = policies[0].1.seed;
    let cells: Vec<(usize, u64)> =
        (0..=policies.len()).flat_map(|p| (0..seeds as u64).map(move |s| (p, s))).collect();

    let run_cell = |&(p, s): &(usize, u64)| -> Result<Vec<f64>> {
        if p < policies.len() {
            let mut cfg = policies[p].1.clone();
            cfg.seed = rng::derive_seed(cfg.seed, COMPARE_TAG, s);
            let trace = try_run_loop(cfg, |x| Ok::<f64, Error>(objective(x)), noise)?;
            Ok(best_so_far(&objective, trace.into_iter().map(|r| r.x)))
        } else {
            let seed = rng::derive_seed(base_seed, RANDOM_TAG, s);
            let mut r = rng::seeded(seed);
            let xs: Vec<Vec<f64>> = (0..budget).map(|_| bounds.sample_uniform(&mut r)).collect();
            Ok(best_so_far(&objective, xs.into_iter()))
        }
    };

    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(cells.len());
    let chunk = cells.len().div_ceil(threads);
    let results: Vec<Result<Vec<f64>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cells
            .chunks(chunk)
            .map(|part| scope.spawn(|| part.iter().map(&run_cell).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("comparison worker panicked")).collect()
    });

    let mut rows = Vec::new();
    let mut per_policy: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for (&(p, s), res) in cells.iter().zip(results) {
        let curve = res?;
        let name = if p < policies.len() { policies[p].0.clone() } else { RANDOM_SEARCH.to_string() };
        for (i, v) in curve.iter().enumerate() {
            rows.push(ComparisonRow { policy: name.clone(), seed: s, n: i + 1, best_value: *v });
        }
        per_policy.entry(name).or_default().push(curve);
    }
    let summary = per_policy
        .into_iter()
        .map(|(name, curves)| {
            let len = curves.iter().map(Vec::len).min().unwrap_or(0);
            let mut s = PolicySummary { n: Vec::new(), q25: Vec::new(), median: Vec::new(), q75: Vec::new() };
            for i in 0..len {
                let col: Vec<f64> = curves.iter().map(|c| c[i]).collect();
                s.n.push(i + 1);
                s.q25.push(quantile(&col, 0.25));
                s.median.push(quantile(&col, 0.5));
                s.q75.push(quantile(&col, 0.75));
            }
            (name, s)
        })
        .collect();
    Ok(Comparison { rows, summary })
}
