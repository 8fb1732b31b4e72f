//! `fourier-audit` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 budget or transport
//! failure, 4 degenerate input.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};

use fourier_audit::audit::{run_audit, AuditRequest};
use fourier_audit::dist::DistributionSpec;
use fourier_audit::estimators::{Method, PropertySpec};
use fourier_audit::exact::{exact_property, monte_carlo_property};
use fourier_audit::goldreich_levin::{goldreich_levin, GlConfig};
use fourier_audit::harness::{ingest_csv, parse_dist, parse_property, run_sweep, CsvSchema, SweepConfig};
use fourier_audit::models::{build_model, connect, AuditBudget, Endpoint, ModelOracle, ModelSpec};
use fourier_audit::point::PointVector;
use fourier_audit::rng::RandomSource;
use fourier_audit::{AuditError, OracleError};

const CONNECT_TIMEOUT: Duration = Duration::from_secs(30);
const PROBES: usize = 16;

#[derive(Parser, Debug)]
#[command(name = "fourier-audit", version, about = "Black-box audits of robustness, individual fairness and statistical parity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate one property and print an audit report.
    Audit(AuditArgs),
    /// List the significant coefficients found by the Goldreich-Levin search.
    Spectrum(SpectrumArgs),
    /// Compute a property by enumeration (or sampling with --samples).
    Exact(ExactArgs),
    /// Run an error-vs-budget sweep from a config file.
    Sweep(SweepArgs),
    /// Handshake with an endpoint and round-trip probe points.
    ProtocolCheck(ProtocolArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Built-in model, e.g. `dictator:1`, `maj3`, `random-ltf/n=8/seed=3`.
    #[arg(long, conflicts_with = "endpoint")]
    model: Option<String>,
    /// Served model, `tcp:host:port` or `stdio:command args`.
    #[arg(long)]
    endpoint: Option<String>,
    /// `uniform`, `product:b1,...,bn` (biases are E[x_i]) or `csv:path[;schema=file]`.
    #[arg(long, default_value = "uniform")]
    dist: String,
    /// Falls back to AUDIT_SEED, then 0.
    #[arg(long, env = "AUDIT_SEED", default_value_t = 0)]
    seed: u64,
    /// Also write the report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PropertyArgs {
    #[arg(long, value_parser = ["rob", "if", "sp", "mc"])]
    property: String,
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    #[arg(long)]
    l: Option<usize>,
    /// Sensitive coordinate, 1-based.
    #[arg(long)]
    sensitive: Option<usize>,
}

impl PropertyArgs {
    fn resolve(&self) -> Result<PropertySpec, AuditError> {
        parse_property(&self.property, self.rho, self.l, self.sensitive)
    }
}

#[derive(Args, Debug)]
struct AuditArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    property: PropertyArgs,
    #[arg(long, default_value = "afa", value_parser = ["afa", "uniform", "exact"])]
    method: String,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 10_000)]
    budget: u64,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0.2)]
    tau: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Unlimited when absent.
    #[arg(long)]
    budget: Option<u64>,
    /// Only search subsets containing this coordinate (1-based).
    #[arg(long)]
    sensitive: Option<usize>,
}

#[derive(Args, Debug)]
struct ExactArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    property: PropertyArgs,
    /// Use a Monte-Carlo reference with this many samples instead of enumeration.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    config: PathBuf,
    /// Overrides the config's seed; falls back to the config, then AUDIT_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProtocolArgs {
    #[arg(long)]
    endpoint: String,
    #[arg(long, env = "AUDIT_SEED", default_value_t = 0)]
    seed: u64,
}

fn exit_code(e: &AuditError) -> u8 {
    if let Some(o) = e.oracle_cause() {
        return match o {
            OracleError::OffSupport(_) => 4,
            OracleError::DimensionMismatch { .. } => 2,
            _ => 3,
        };
    }
    match e {
        AuditError::DegenerateGroup(_) | AuditError::StarvedGroup { .. } | AuditError::NoValidPair => 4,
        _ => 2,
    }
}

fn load_model(args: &ModelArgs) -> Result<(ModelOracle, DistributionSpec), AuditError> {
    let dataset = match args.dist.strip_prefix("csv:") {
        Some(rest) => {
            let (path, schema) = match rest.split_once(";schema=") {
                Some((p, s)) => (p, Some(CsvSchema::load(Path::new(s))?)),
                None => (rest, None),
            };
            Some(ingest_csv(Path::new(path), &schema.unwrap_or_else(CsvSchema::all_sign))?)
        }
        None => None,
    };
    let model = match (&args.model, &args.endpoint, &dataset) {
        (Some(m), _, _) => build_model(&ModelSpec::parse(m)?)?,
        (None, Some(e), _) => connect(&Endpoint::parse(e)?, CONNECT_TIMEOUT)?,
        (None, None, Some(d)) => d.model.clone(),
        (None, None, None) => {
            return Err(AuditError::InvalidParameter("one of --model, --endpoint or --dist csv:... is required".into()))
        }
    };
    let dist = match dataset {
        Some(d) => d.dist,
        None => parse_dist(&args.dist, model.dim())?,
    };
    if dist.dim() != model.dim() {
        return Err(AuditError::InvalidParameter(format!(
            "model has dimension {}, distribution has {}",
            model.dim(),
            dist.dim()
        )));
    }
    Ok((model, dist))
}

fn header(out: &mut String, seed: u64, model: &ModelOracle, dist: &str) {
    writeln!(out, "seed: {seed}").unwrap();
    writeln!(out, "model: {}", model.name()).unwrap();
    writeln!(out, "dist: {dist}").unwrap();
}

fn audit(args: &AuditArgs) -> Result<String, AuditError> {
    let start = Instant::now();
    let (model, dist) = load_model(&args.model)?;
    let mut req = AuditRequest::new(args.property.resolve()?, Method::parse(&args.method)?, args.budget);
    req.tau = args.tau;
    req.delta = args.delta;
    let report = run_audit(&model, &dist, &req, &mut RandomSource::new(args.model.seed))?;
    let mut out = String::new();
    header(&mut out, args.model.seed, &model, &args.model.dist);
    writeln!(out, "n: {}", model.dim()).unwrap();
    write!(out, "{report}").unwrap();
    writeln!(out, "# wall_ms: {:.3}", start.elapsed().as_secs_f64() * 1e3).unwrap();
    Ok(out)
}

fn spectrum(args: &SpectrumArgs) -> Result<String, AuditError> {
    let start = Instant::now();
    let (model, dist) = load_model(&args.model)?;
    let mut cfg = GlConfig::new(args.tau, args.delta);
    if let Some(a) = args.sensitive {
        if a == 0 {
            return Err(AuditError::InvalidParameter("sensitive coordinate is 1-based".into()));
        }
        cfg = cfg.restrict_to(a - 1);
    }
    let budget = args.budget.map_or_else(AuditBudget::unlimited, AuditBudget::new);
    let list = goldreich_levin(&model, &dist, &cfg, &budget, &mut RandomSource::new(args.model.seed))?;
    let mut out = String::new();
    header(&mut out, args.model.seed, &model, &args.model.dist);
    write!(out, "{list}").unwrap();
    writeln!(out, "# wall_ms: {:.3}", start.elapsed().as_secs_f64() * 1e3).unwrap();
    Ok(out)
}

fn exact(args: &ExactArgs) -> Result<String, AuditError> {
    let (model, dist) = load_model(&args.model)?;
    let property = args.property.resolve()?;
    let result = match args.samples {
        Some(m) => monte_carlo_property(&model, &dist, &property, m, &mut RandomSource::new(args.model.seed))?,
        None => exact_property(&model, &dist, &property)?,
    };
    let mut out = String::new();
    header(&mut out, args.model.seed, &model, &args.model.dist);
    writeln!(out, "n: {}", model.dim()).unwrap();
    write!(out, "{result}").unwrap();
    Ok(out)
}

fn sweep(args: &SweepArgs) -> Result<String, AuditError> {
    let text = std::fs::read_to_string(&args.config)?;
    let has_seed = text.lines().any(|l| l.trim_start().starts_with("seed ") || l.trim_start().starts_with("seed="));
    let mut cfg = SweepConfig::from_toml(&text, args.config.parent().unwrap_or(Path::new(".")))?;
    if let Some(s) = args.seed {
        cfg.base_seed = s;
    } else if !has_seed {
        if let Some(s) = std::env::var("AUDIT_SEED").ok().and_then(|v| v.parse().ok()) {
            cfg.base_seed = s;
        }
    }
    if let Some(o) = &args.out {
        cfg.output = Some(o.clone());
    }
    let start = Instant::now();
    let artifact = run_sweep(&cfg)?;
    let mut out = String::new();
    writeln!(out, "seed: {}", cfg.base_seed).unwrap();
    writeln!(out, "rows: {}", artifact.rows.len()).unwrap();
    match &cfg.output {
        Some(p) => writeln!(out, "output: {}", p.display()).unwrap(),
        None => out.push_str(&artifact.to_csv()),
    }
    writeln!(out, "# wall_ms: {:.3}", start.elapsed().as_secs_f64() * 1e3).unwrap();
    Ok(out)
}

fn protocol_check(args: &ProtocolArgs) -> Result<String, AuditError> {
    let model = connect(&Endpoint::parse(&args.endpoint)?, CONNECT_TIMEOUT)?;
    let n = model.dim();
    let mut rng = RandomSource::new(args.seed);
    let probes: Vec<PointVector> = (0..PROBES).map(|_| DistributionSpec::Uniform(n).sample(&mut rng)).collect();
    let budget = AuditBudget::unlimited();
    let first = model.query_batch(&probes, &budget)?;
    let second = model.query_batch(&probes, &budget)?;
    let mut out = String::new();
    writeln!(out, "seed: {}", args.seed).unwrap();
    writeln!(out, "endpoint: {}", args.endpoint).unwrap();
    writeln!(out, "n: {n}").unwrap();
    writeln!(out, "labels: {}", model.arity()).unwrap();
    writeln!(out, "probes: {}", probes.len()).unwrap();
    for (x, y) in probes.iter().zip(&first) {
        writeln!(out, "  {x} -> {y}").unwrap();
    }
    let consistent = first == second;
    writeln!(out, "consistent: {consistent}").unwrap();
    if !consistent {
        return Err(OracleError::Protocol { message: "repeated probes returned different labels".into(), acknowledged: 2 * PROBES as u64 }.into());
    }
    writeln!(out, "status: ok").unwrap();
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, out_path) = match &cli.command {
        Command::Audit(a) => (audit(a), a.model.out.clone()),
        Command::Spectrum(a) => (spectrum(a), a.model.out.clone()),
        Command::Exact(a) => (exact(a), a.model.out.clone()),
        Command::Sweep(a) => (sweep(a), None),
        Command::ProtocolCheck(a) => (protocol_check(a), None),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            if let Some(p) = out_path {
                if let Err(e) = std::fs::write(&p, &text) {
                    eprintln!("error: writing {}: {e}", p.display());
                    return ExitCode::from(2);
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
