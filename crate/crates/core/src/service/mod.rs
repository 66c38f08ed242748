//! Campaign persistence, the trace CSV, posterior slices, the HTTP API and
//! the command-line front end.

mod cli;
mod http;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::driver::{LoopConfig, Optimizer, Suggestion, TraceRecord};
use crate::error::{Error, Result};
use crate::acq::{observed_index, observed_moments};
use crate::gp::{MixturePredictive, Predictive, CREDIBLE_95};

pub use cli::{cli_main, RunSpec};
pub use http::{router, serve};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CampaignStatus {
    Active,
    /// The budget is used up; no further suggestions or observations.
    Closed,
}

/// A persistent ask-tell session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub schema_version: u32,
    pub id: String,
    pub created_at: DateTime<Utc>,
    pub status: CampaignStatus,
    #[serde(flatten)]
    pub state: Optimizer,
}

impl Campaign {
    pub fn new(config: LoopConfig) -> Result<Self> {
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            id: uuid::Uuid::new_v4().to_string(),
            created_at: Utc::now(),
            status: CampaignStatus::Active,
            state: Optimizer::new(config)?,
        })
    }

    fn ensure_active(&self) -> Result<()> {
        match self.status {
            CampaignStatus::Active => Ok(()),
            CampaignStatus::Closed => Err(Error::Conflict(format!("campaign {} is closed", self.id))),
        }
    }

    pub fn suggest(&mut self) -> Result<Suggestion> {
        self.ensure_active()?;
        self.state.suggest()
    }

    pub fn tell(&mut self, x: Vec<f64>, y: f64) -> Result<TraceRecord> {
        self.ensure_active()?;
        let record = self.state.ingest(x, y)?.clone();
        if self.state.is_complete() {
            self.status = CampaignStatus::Closed;
        }
        Ok(record)
    }

    pub fn summary(&self) -> CampaignSummary {
        let data = self.state.data();
        CampaignSummary {
            id: self.id.clone(),
            schema_version: self.schema_version,
            created_at: self.created_at,
            status: self.status,
            config: self.state.config().clone(),
            points: data.points().to_vec(),
            values: data.values().to_vec(),
            best: self.state.best_observed().map(|(x, y)| BestPoint { x, y }),
            pending_suggestion: self.state.pending().cloned(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("campaign serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Version {
            schema_version: u32,
        }
        let v: Version = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if v.schema_version != SCHEMA_VERSION {
            return Err(Error::IncompatibleVersion { found: v.schema_version, expected: SCHEMA_VERSION });
        }
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestPoint {
    pub x: Vec<f64>,
    pub y: f64,
}

/// What `GET /campaigns/{id}` returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub id: String,
    pub schema_version: u32,
    pub created_at: DateTime<Utc>,
    pub status: CampaignStatus,
    pub config: LoopConfig,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub best: Option<BestPoint>,
    pub pending_suggestion: Option<Suggestion>,
}

/// Directory of `<id>.json` campaign documents.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, id: &str) -> Result<PathBuf> {
        let ok = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !ok {
            return Err(Error::NotFound(id.to_string()));
        }
        Ok(self.root.join(format!("{id}.json")))
    }

    /// Writes to a temporary file and renames it over the old document.
    pub fn save(&self, campaign: &Campaign) -> Result<String> {
        let path = self.path(&campaign.id)?;
        let tmp = self.root.join(format!(".{}.{}.tmp", campaign.id, uuid::Uuid::new_v4()));
        let mut f = fs::File::create(&tmp)?;
        f.write_all(campaign.to_json().as_bytes())?;
        f.sync_all()?;
        drop(f);
        fs::rename(&tmp, &path).inspect_err(|_| {
            let _ = fs::remove_file(&tmp);
        })?;
        Ok(campaign.id.clone())
    }

    pub fn load(&self, id: &str) -> Result<Campaign> {
        let path = self.path(id)?;
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::NotFound(id.to_string())),
            Err(e) => return Err(e.into()),
        };
        Campaign::from_json(&text).map_err(|e| e.context(format!("campaign {id}")))
    }

    pub fn delete(&self, id: &str) -> Result<()> {
        match fs::remove_file(self.path(id)?) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::NotFound(id.to_string())),
            Err(e) => Err(e.into()),
        }
    }

    /// Ids of stored campaigns, sorted.
    pub fn list(&self) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if let Some(id) = name.strip_suffix(".json") {
                if !id.starts_with('.') {
                    ids.push(id.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Loads, applies `f` and saves only if `f` succeeds.
    pub fn update<T>(&self, id: &str, f: impl FnOnce(&mut Campaign) -> Result<T>) -> Result<T> {
        let mut c = self.load(id)?;
        let out = f(&mut c)?;
        self.save(&c)?;
        Ok(out)
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Trace as CSV: `n,x_1..x_d,y,best_observed,best_posterior_mean,acq_value,elapsed_ms`.
/// A missing acquisition value is an empty field.
pub fn trace_csv(trace: &[TraceRecord], dim: usize) -> String {
    let mut out = String::from("n,");
    for i in 1..=dim {
        out.push_str(&format!("x_{i},"));
    }
    out.push_str("y,best_observed,best_posterior_mean,acq_value,elapsed_ms\n");
    for r in trace {
        let mut fields = vec![r.n.to_string()];
        fields.extend(r.x.iter().map(|v| fmt_f64(*v)));
        fields.push(fmt_f64(r.y));
        fields.push(fmt_f64(r.best_observed));
        fields.push(fmt_f64(r.best_posterior_mean));
        fields.push(r.acq_value.map(fmt_f64).unwrap_or_default());
        fields.push(r.elapsed_ms.to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Posterior mean and 95% band along one axis with the other coordinates fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSlice {
    pub axis: usize,
    pub fixed: Vec<f64>,
    pub xs: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower95: Vec<f64>,
    pub upper95: Vec<f64>,
}

impl PosteriorSlice {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,mean,lower95,upper95\n");
        for i in 0..self.xs.len() {
            out.push_str(&format!("{},{},{},{}\n", self.xs[i], self.mean[i], self.lower95[i], self.upper95[i]));
        }
        out
    }
}

/// Evenly spaced slice along `axis` through `fixed` (the box midpoint when
/// absent). Every observed coordinate on the slice line is added to the grid.
/// At observed points the latent moments treat the jitter as a nugget. In
/// fully-Bayesian mode the band is that of the equal-weight mixture.
pub fn posterior_slice(state: &Optimizer, axis: usize, fixed: Option<Vec<f64>>, points: usize) -> Result<PosteriorSlice> {
    let bounds = &state.config().bounds;
    let d = bounds.dim();
    if axis >= d {
        return Err(Error::invalid(format!("axis {axis} out of range for dimension {d}")));
    }
    if points < 2 {
        return Err(Error::invalid("slice needs at least 2 points"));
    }
    let fixed = fixed.unwrap_or_else(|| bounds.midpoint());
    if fixed.len() != d {
        return Err(Error::invalid(format!("fixed point has dimension {}, campaign has {d}", fixed.len())));
    }
    let mut probe = fixed.clone();
    probe[axis] = bounds.lower()[axis];
    bounds.check_contains(&probe)?;

    let (lo, width) = (bounds.lower()[axis], bounds.width(axis));
    let mut xs: Vec<f64> = (0..points).map(|k| lo + width * k as f64 / (points - 1) as f64).collect();
    for p in state.data().points() {
        if (0..d).all(|i| i == axis || p[i] == fixed[i]) {
            xs.push(p[axis]);
        }
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    xs.dedup();

    let states = state.posteriors()?;
    let mut out = PosteriorSlice {
        axis,
        fixed: fixed.clone(),
        xs: Vec::with_capacity(xs.len()),
        mean: Vec::new(),
        lower95: Vec::new(),
        upper95: Vec::new(),
    };
    for v in xs {
        let mut x = fixed.clone();
        x[axis] = v;
        let components = states
            .iter()
            .map(|s| match observed_index(s, &x) {
                Some(i) => {
                    let (mean, variance) = observed_moments(s, i);
                    Ok(Predictive { mean, variance })
                }
                None => s.predict(&x),
            })
            .collect::<Result<Vec<_>>>()?;
        let mix = MixturePredictive { components };
        let (m, sd) = (mix.mean(), mix.variance().sqrt());
        out.xs.push(v);
        out.mean.push(m);
        out.lower95.push(m - CREDIBLE_95 * sd);
        out.upper95.push(m + CREDIBLE_95 * sd);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::Bounds;

    fn config() -> LoopConfig {
        LoopConfig::new(Bounds::new(vec![0.0], vec![4.0]).unwrap(), 2, 4)
    }

    #[test]
    fn store_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let mut c = Campaign::new(config()).unwrap();
        let id = store.save(&c).unwrap();
        assert_eq!(store.load(&id).unwrap(), c);
        c.tell(vec![1.0], 0.25).unwrap();
        store.save(&c).unwrap();
        assert_eq!(store.load(&id).unwrap(), c);
        assert_eq!(store.list().unwrap(), vec![id.clone()]);
        assert!(matches!(store.load("missing"), Err(Error::NotFound(_))));
        assert!(matches!(store.load("../etc/passwd"), Err(Error::NotFound(_))));

        fs::write(dir.path().join("bad.json"), "{\"schema_version\":1,").unwrap();
        assert!(matches!(store.load("bad"), Err(Error::Parse(_))));
        let v2 = c.to_json().replacen("\"schema_version\": 1", "\"schema_version\": 2", 1);
        fs::write(dir.path().join("v2.json"), v2).unwrap();
        assert!(matches!(store.load("v2"), Err(Error::IncompatibleVersion { found: 2, .. })));
    }

    #[test]
    fn failed_update_leaves_store_unchanged() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let c = Campaign::new(config()).unwrap();
        store.save(&c).unwrap();
        assert!(store.update(&c.id, |c| c.tell(vec![9.0], 1.0)).is_err());
        assert_eq!(store.load(&c.id).unwrap(), c);
    }

    #[test]
    fn campaign_closes_at_budget() {
        let mut c = Campaign::new(config()).unwrap();
        for (x, y) in [(0.5, 1.0), (1.5, 2.0), (2.5, 0.0), (3.5, 1.0)] {
            c.tell(vec![x], y).unwrap();
        }
        assert_eq!(c.status, CampaignStatus::Closed);
        assert!(matches!(c.suggest(), Err(Error::Conflict(_))));
    }

    #[test]
    fn csv_layout() {
        let mut c = Campaign::new(config()).unwrap();
        let s = c.suggest().unwrap();
        c.tell(s.x().to_vec(), 0.1).unwrap();
        let csv = trace_csv(c.state.trace(), 1);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "n,x_1,y,best_observed,best_posterior_mean,acq_value,elapsed_ms");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 7);
        assert_eq!(row[0], "1");
        assert_eq!(row[1].parse::<f64>().unwrap(), s.x()[0]);
        assert_eq!(row[5], "");
    }

    #[test]
    fn slice_band_collapses_at_data() {
        let mut c = Campaign::new(config()).unwrap();
        for (x, y) in [(0.5, 1.0), (2.0, -1.0), (3.0, 0.5)] {
            c.tell(vec![x], y).unwrap();
        }
        let s = posterior_slice(&c.state, 0, None, 41).unwrap();
        let amp = c.state.hyperparameters()[0].kernel.amplitude;
        for i in 0..s.xs.len() {
            assert!(s.lower95[i] <= s.mean[i] && s.mean[i] <= s.upper95[i]);
            if [0.5, 2.0, 3.0].contains(&s.xs[i]) {
                assert!(s.upper95[i] - s.lower95[i] <= 1e-5 * amp.sqrt());
            }
        }
        assert!(posterior_slice(&c.state, 1, None, 10).is_err());
    }
}
