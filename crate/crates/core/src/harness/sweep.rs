//! Error-versus-budget sweeps written as CSV.
//!
//! Config (TOML, flat keys; paths relative to the config file):
//!
//! ```toml
//! model = "random-ltf/n=8/seed=3"   # or endpoint = "tcp:host:port", or dataset = "rows.csv" (+ schema = "s.toml")
//! dist = "uniform"                   # or "product:b1,...,bn"; datasets use their row frequencies
//! property = "sp"                    # rob | if | sp | mc
//! sensitive = 1                      # 1-based; rho / l for rob and if
//! methods = ["afa", "uniform", "exact"]
//! budgets = [500, 2000, 8000]
//! seeds = 10
//! seed = 0
//! output = "sweep.csv"
//! ```

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Deserialize;

use super::dataset::{ingest_csv, CsvSchema};
use super::parse_dist;
use crate::audit::{run_audit, AuditRequest};
use crate::dist::DistributionSpec;
use crate::error::{AuditError, Result};
use crate::estimators::{Method, PropertySpec};
use crate::exact::{exact_property, monte_carlo_property, ExactResult};
use crate::models::{build_model, connect, Endpoint, ModelOracle, ModelSpec};
use crate::rng::RandomSource;

pub const CSV_HEADER: &str = "method,budget,seed,estimate,exact,abs_error,queries,wall_ms";

/// Samples for the sampled reference when enumeration is out of reach.
pub const DEFAULT_REFERENCE_SAMPLES: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub enum ModelSource {
    Spec(ModelSpec),
    Endpoint(Endpoint),
    Dataset { path: PathBuf, schema: Option<PathBuf> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub model: ModelSource,
    /// Ignored for datasets.
    pub dist: String,
    pub property: PropertySpec,
    pub methods: Vec<Method>,
    pub budgets: Vec<u64>,
    pub seeds: usize,
    pub base_seed: u64,
    pub tau: Option<f64>,
    pub delta: f64,
    pub output: Option<PathBuf>,
    pub reference_samples: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Option<String>,
    endpoint: Option<String>,
    dataset: Option<String>,
    schema: Option<String>,
    dist: Option<String>,
    property: String,
    rho: Option<f64>,
    l: Option<usize>,
    sensitive: Option<usize>,
    methods: Vec<String>,
    budgets: Vec<u64>,
    seeds: usize,
    seed: Option<u64>,
    tau: Option<f64>,
    delta: Option<f64>,
    output: Option<String>,
    reference_samples: Option<usize>,
}

/// `rob | if | sp | mc` with their parameters; `sensitive` is 1-based.
pub fn parse_property(kind: &str, rho: Option<f64>, l: Option<usize>, sensitive: Option<usize>) -> Result<PropertySpec> {
    let need = |what: &str| AuditError::InvalidParameter(format!("property '{kind}' needs {what}"));
    let a = || -> Result<usize> {
        match sensitive {
            Some(0) => Err(AuditError::InvalidParameter("sensitive coordinate is 1-based".into())),
            Some(a) => Ok(a - 1),
            None => Err(need("a sensitive coordinate")),
        }
    };
    match kind {
        "rob" => Ok(PropertySpec::Robustness { rho: rho.ok_or_else(|| need("rho"))? }),
        "if" => Ok(PropertySpec::IndividualFairness { rho: rho.ok_or_else(|| need("rho"))?, l: l.ok_or_else(|| need("l"))? }),
        "sp" => Ok(PropertySpec::StatisticalParity { sensitive: a()? }),
        "mc" => Ok(PropertySpec::Multicalibration { sensitive: a()? }),
        other => Err(AuditError::InvalidParameter(format!("unknown property '{other}' (rob | if | sp | mc)"))),
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| AuditError::Config(e.to_string()))?;
        let rel = |p: &str| -> PathBuf {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };
        let model = match (&raw.model, &raw.endpoint, &raw.dataset) {
            (Some(m), None, None) => ModelSource::Spec(ModelSpec::parse(m)?),
            (None, Some(e), None) => ModelSource::Endpoint(Endpoint::parse(e)?),
            (None, None, Some(d)) => ModelSource::Dataset { path: rel(d), schema: raw.schema.as_deref().map(rel) },
            _ => return Err(AuditError::Config("exactly one of model, endpoint, dataset is required".into())),
        };
        let methods = raw.methods.iter().map(|m| Method::parse(m)).collect::<Result<Vec<_>>>()?;
        let cfg = Self {
            model,
            dist: raw.dist.unwrap_or_else(|| "uniform".into()),
            property: parse_property(&raw.property, raw.rho, raw.l, raw.sensitive)?,
            methods,
            budgets: raw.budgets,
            seeds: raw.seeds,
            base_seed: raw.seed.unwrap_or(0),
            tau: raw.tau,
            delta: raw.delta.unwrap_or(0.05),
            output: raw.output.as_deref().map(rel),
            reference_samples: raw.reference_samples.unwrap_or(DEFAULT_REFERENCE_SAMPLES),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(AuditError::Config("methods must not be empty".into()));
        }
        if self.budgets.is_empty() || self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AuditError::Config("budgets must be non-empty and strictly increasing".into()));
        }
        if self.seeds == 0 {
            return Err(AuditError::Config("seeds must be at least 1".into()));
        }
        Ok(())
    }

    /// Build the model and input distribution.
    pub fn resolve(&self) -> Result<(ModelOracle, DistributionSpec)> {
        match &self.model {
            ModelSource::Spec(s) => {
                let m = build_model(s)?;
                let d = parse_dist(&self.dist, m.dim())?;
                Ok((m, d))
            }
            ModelSource::Endpoint(e) => {
                let m = connect(e, Duration::from_secs(30))?;
                let d = parse_dist(&self.dist, m.dim())?;
                Ok((m, d))
            }
            ModelSource::Dataset { path, schema } => {
                let schema = match schema {
                    Some(p) => CsvSchema::load(p)?,
                    None => CsvSchema::all_sign(),
                };
                let ds = ingest_csv(path, &schema)?;
                Ok((ds.model, ds.dist))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub method: Method,
    pub budget: u64,
    pub seed: usize,
    /// Headline value, or the error message of a failed run.
    pub estimate: std::result::Result<f64, String>,
    pub exact: Option<f64>,
    pub queries: u64,
    pub wall_ms: f64,
}

impl SweepRow {
    pub fn abs_error(&self) -> Option<f64> {
        match (&self.estimate, self.exact) {
            (Ok(e), Some(x)) => Some((e - x).abs()),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepArtifact {
    pub rows: Vec<SweepRow>,
    pub reference: std::result::Result<ExactResult, String>,
}

impl SweepArtifact {
    /// CSV text. A sampled reference is announced on a leading `#` line.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        let f = |v: Option<f64>, p: usize| v.map_or_else(String::new, |x| format!("{x:.p$}"));
        for r in &self.rows {
            let est = match &r.estimate {
                Ok(v) => format!("{v:.9}"),
                Err(e) => format!("error: {e}"),
            };
            w.write_record([
                r.method.to_string(),
                r.budget.to_string(),
                r.seed.to_string(),
                est,
                f(r.exact, 9),
                f(r.abs_error(), 9),
                r.queries.to_string(),
                format!("{:.3}", r.wall_ms),
            ])
            .expect("writing to memory");
        }
        let body = String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf8");
        let mut out = String::new();
        match &self.reference {
            Ok(e) if e.monte_carlo => out.push_str(&format!("# reference: monte-carlo, {} samples\n", e.enumeration_size)),
            Err(e) => out.push_str(&format!("# reference unavailable: {e}\n")),
            _ => {}
        }
        out.push_str(CSV_HEADER);
        out.push('\n');
        out.push_str(&body);
        out
    }

    pub fn rows_for(&self, method: Method, budget: u64) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.method == method && r.budget == budget)
    }

    pub fn mean_abs_error(&self, method: Method, budget: u64) -> Option<f64> {
        let errs: Vec<f64> = self.rows_for(method, budget).filter_map(|r| r.abs_error()).collect();
        (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
    }
}

fn reference(model: &ModelOracle, dist: &DistributionSpec, cfg: &SweepConfig) -> std::result::Result<ExactResult, String> {
    match exact_property(model, dist, &cfg.property) {
        Ok(e) => Ok(e),
        Err(AuditError::TooLarge { .. }) => {
            let mut rng = RandomSource::new(cfg.base_seed).derive(0x5245_4600);
            monte_carlo_property(model, dist, &cfg.property, cfg.reference_samples, &mut rng).map_err(|e| e.to_string())
        }
        Err(e) => Err(e.to_string()),
    }
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepArtifact> {
    cfg.validate()?;
    let (model, dist) = cfg.resolve()?;
    cfg.property.validate(dist.dim())?;
    let reference = reference(&model, &dist, cfg);
    let exact = reference.as_ref().ok().map(|e| e.value);

    let mut tasks = Vec::new();
    for &method in &cfg.methods {
        for &budget in &cfg.budgets {
            for seed in 0..cfg.seeds {
                tasks.push((method, budget, seed));
            }
        }
    }
    let rows = tasks
        .par_iter()
        .map(|&(method, budget, seed)| {
            let req = AuditRequest { property: cfg.property, method, tau: cfg.tau, delta: cfg.delta, budget };
            // Seed-matched across methods: the stream depends on (seed, budget) only.
            let mut rng = RandomSource::new(cfg.base_seed.wrapping_add(seed as u64)).derive(budget);
            let start = Instant::now();
            let out = run_audit(&model, &dist, &req, &mut rng);
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            let (estimate, queries) = match out {
                Ok(r) => (Ok(r.headline()), r.queries),
                Err(e) => (Err(e.to_string()), 0),
            };
            SweepRow { method, budget, seed, estimate, exact, queries, wall_ms }
        })
        .collect();
    let art = SweepArtifact { rows, reference };
    if let Some(path) = &cfg.output {
        std::fs::write(path, art.to_csv())?;
    }
    Ok(art)
}
