//! Property estimators built on the spectrum: characteristic functions, the
//! spectral plug-in for robustness and individual fairness, membership influence,
//! the statistical-parity quadratic, and the multiclass extension.

use std::collections::BTreeMap;
use std::fmt;

use crate::basis::OrthonormalBasis;
use crate::dist::{DistributionSpec, PerturbationSpec};
use crate::error::{AuditError, Result};
use crate::goldreich_levin::{goldreich_levin, BucketSampling, GlConfig, SpectrumEntry, SpectrumList, WEIGHT_SLACK};
use crate::models::{AuditBudget, ModelOracle};
use crate::point::SubsetIndex;
use crate::rng::RandomSource;

/// The audited property. Coordinates are 0-based.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PropertySpec {
    Robustness { rho: f64 },
    IndividualFairness { rho: f64, l: usize },
    StatisticalParity { sensitive: usize },
    Multicalibration { sensitive: usize },
}

impl PropertySpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            PropertySpec::Robustness { rho } => PerturbationSpec::Flip { rho }.validate(n),
            PropertySpec::IndividualFairness { rho, l } => PerturbationSpec::FlipL { rho, l }.validate(n),
            PropertySpec::StatisticalParity { sensitive } | PropertySpec::Multicalibration { sensitive } => {
                if sensitive >= n {
                    Err(AuditError::InvalidParameter(format!("sensitive coordinate {} outside 1..={n}", sensitive + 1)))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// The perturbation behind Rob/IF.
    pub fn perturbation(&self) -> Option<PerturbationSpec> {
        match *self {
            PropertySpec::Robustness { rho } => Some(PerturbationSpec::Flip { rho }),
            PropertySpec::IndividualFairness { rho, l } => Some(PerturbationSpec::FlipL { rho, l }),
            _ => None,
        }
    }

    pub fn sensitive(&self) -> Option<usize> {
        match *self {
            PropertySpec::StatisticalParity { sensitive } | PropertySpec::Multicalibration { sensitive } => Some(sensitive),
            _ => None,
        }
    }

    pub fn is_spectral(&self) -> bool {
        self.perturbation().is_some()
    }
}

impl fmt::Display for PropertySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PropertySpec::Robustness { rho } => write!(f, "rob(rho={rho})"),
            PropertySpec::IndividualFairness { rho, l } => write!(f, "if(rho={rho},l={l})"),
            PropertySpec::StatisticalParity { sensitive } => write!(f, "sp(A={})", sensitive + 1),
            PropertySpec::Multicalibration { sensitive } => write!(f, "mc(A={})", sensitive + 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Afa,
    Uniform,
    Exact,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "afa" => Ok(Method::Afa),
            "uniform" => Ok(Method::Uniform),
            "exact" => Ok(Method::Exact),
            other => Err(AuditError::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Afa => "AFA",
            Method::Uniform => "Uniform",
            Method::Exact => "Exact",
        })
    }
}

/// Result of one audit.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub property: PropertySpec,
    pub method: Method,
    /// Rob/IF: the correlation `E[h(x) h(y)]`. SP/MC: the parity gap.
    pub estimate: f64,
    pub correlation: Option<f64>,
    pub flip_probability: Option<f64>,
    pub tau: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub queries: u64,
    pub spectrum: Option<SpectrumList>,
    pub diagnostics: BTreeMap<String, f64>,
    pub flags: Vec<String>,
}

impl AuditReport {
    pub fn new(property: PropertySpec, method: Method, estimate: f64) -> Self {
        Self {
            property,
            method,
            estimate,
            correlation: None,
            flip_probability: None,
            tau: None,
            epsilon: None,
            delta: None,
            queries: 0,
            spectrum: None,
            diagnostics: BTreeMap::new(),
            flags: Vec::new(),
        }
    }

    /// The value compared against ground truth: flip probability for Rob/IF, the
    /// estimate otherwise.
    pub fn headline(&self) -> f64 {
        self.flip_probability.unwrap_or(self.estimate)
    }

    pub fn diag(&mut self, key: &str, v: f64) {
        self.diagnostics.insert(key.to_string(), v);
    }

    pub fn flag(&mut self, f: impl Into<String>) {
        let f = f.into();
        if !self.flags.contains(&f) {
            self.flags.push(f);
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x:.6}"))
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "property: {}", self.property)?;
        writeln!(f, "method: {}", self.method)?;
        writeln!(f, "estimate: {:.6}", self.estimate)?;
        writeln!(f, "correlation: {}", opt(self.correlation))?;
        writeln!(f, "flip_probability: {}", opt(self.flip_probability))?;
        writeln!(f, "tau: {}", opt(self.tau))?;
        writeln!(f, "epsilon: {}", opt(self.epsilon))?;
        writeln!(f, "delta: {}", opt(self.delta))?;
        writeln!(f, "queries: {}", self.queries)?;
        for (k, v) in &self.diagnostics {
            writeln!(f, "diagnostic.{k}: {v:.6}")?;
        }
        writeln!(f, "flags: {}", if self.flags.is_empty() { "none".to_string() } else { self.flags.join(",") })?;
        match &self.spectrum {
            Some(l) => {
                writeln!(f, "spectrum_complete: {}", l.complete)?;
                writeln!(f, "spectrum_entries: {}", l.len())?;
                for e in l.entries() {
                    writeln!(f, "  {} {:.6}", e.subset, e.weight)?;
                }
            }
            None => writeln!(f, "spectrum_entries: none")?,
        }
        Ok(())
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as f64
}

/// Characteristic multiplier for a subset of cardinality `size`.
fn characteristic_by_size(property: &PropertySpec, size: usize, n: usize) -> Result<f64> {
    match *property {
        PropertySpec::Robustness { rho } => Ok(rho.powi(size as i32)),
        PropertySpec::IndividualFairness { rho, l } => {
            // |S cap F| for a uniformly random l-subset F is hypergeometric.
            let total = binomial(n, l);
            Ok((0..=size.min(l))
                .map(|j| binomial(size, j) * binomial(n - size, l - j) / total * rho.powi(j as i32))
                .sum())
        }
        _ => Err(AuditError::UnsupportedProperty(format!("{property} has no characteristic function"))),
    }
}

/// `char(S)`: `rho^|S|` for robustness, `E_F[rho^|S cap F|]` for individual fairness.
pub fn characteristic(property: &PropertySpec, s: SubsetIndex, n: usize) -> Result<f64> {
    property.validate(n)?;
    if !s.fits(n) {
        return Err(AuditError::InvalidParameter(format!("subset {s} outside dimension {n}")));
    }
    characteristic_by_size(property, s.len(), n)
}

/// Two-sample estimates of `hat h(S)^2` for several subsets sharing one batch:
/// `(mean_{i <= m1} h psi_S) * (mean_{j <= m2} h psi_S)` over independent halves.
pub fn estimate_squared_coefficients(
    model: &ModelOracle,
    basis: &OrthonormalBasis,
    subsets: &[SubsetIndex],
    m1: usize,
    m2: usize,
    rng: &mut RandomSource,
    budget: &AuditBudget,
) -> Result<Vec<f64>> {
    if m1 == 0 || m2 == 0 {
        return Err(AuditError::InvalidParameter("m1 and m2 must be at least 1".into()));
    }
    let pts = basis.dist().sample_many(m1 + m2, rng);
    let ys = model.query_batch(&pts, budget).map_err(|source| AuditError::PartialEstimate {
        completed: 0,
        requested: m1 + m2,
        partial: None,
        source,
    })?;
    Ok(subsets
        .iter()
        .map(|&s| {
            let (mut a, mut b) = (0.0, 0.0);
            for (i, (x, y)) in pts.iter().zip(&ys).enumerate() {
                let v = *y as f64 * basis.eval(s, *x);
                if i < m1 {
                    a += v;
                } else {
                    b += v;
                }
            }
            (a / m1 as f64) * (b / m2 as f64)
        })
        .collect())
}

pub fn estimate_squared_coefficient(
    model: &ModelOracle,
    basis: &OrthonormalBasis,
    s: SubsetIndex,
    m1: usize,
    m2: usize,
    rng: &mut RandomSource,
    budget: &AuditBudget,
) -> Result<f64> {
    Ok(estimate_squared_coefficients(model, basis, &[s], m1, m2, rng, budget)?[0])
}

/// How weight missing from a truncated list is accounted for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MassCompletion {
    /// Plain sum over the list.
    None,
    /// Spread `max(0, 1 - sum_L w)` over the subsets outside the list at their
    /// average characteristic value (Parseval completion for +-1 models).
    Parseval,
}

/// Spectral correlation for Rob/IF from a list, plus the residual mass assigned.
pub fn spectral_correlation(
    property: &PropertySpec,
    list: &SpectrumList,
    n: usize,
    completion: MassCompletion,
) -> Result<(f64, f64)> {
    property.validate(n)?;
    let mut chars = Vec::with_capacity(n + 1);
    for k in 0..=n {
        chars.push(characteristic_by_size(property, k, n)?);
    }
    let in_list: f64 = list.entries().iter().map(|e| chars[e.subset.len()] * e.weight).sum();
    if completion == MassCompletion::None {
        return Ok((in_list, 0.0));
    }
    let outside = (1u64 << n) as f64 - list.len() as f64;
    let residual = (1.0 - list.total_weight()).max(0.0);
    if outside <= 0.0 || residual == 0.0 {
        return Ok((in_list, 0.0));
    }
    let all: f64 = (0..=n).map(|k| binomial(n, k) * chars[k]).sum();
    let listed: f64 = list.entries().iter().map(|e| chars[e.subset.len()]).sum();
    let avg = (all - listed) / outside;
    Ok((in_list + avg * residual, residual))
}

/// Plug-in estimate `sum_{S in L} char(S) w_S` with its flip-probability companion.
pub fn estimate_spectral_property(property: &PropertySpec, list: &SpectrumList, n: usize) -> Result<AuditReport> {
    spectral_report(property, list, n, MassCompletion::None)
}

pub fn spectral_report(
    property: &PropertySpec,
    list: &SpectrumList,
    n: usize,
    completion: MassCompletion,
) -> Result<AuditReport> {
    if !property.is_spectral() {
        return Err(AuditError::UnsupportedProperty(format!("{property} is not a spectral property")));
    }
    let (corr, residual) = spectral_correlation(property, list, n, completion)?;
    let corr = corr.clamp(-1.0, 1.0);
    let mut r = AuditReport::new(*property, Method::Afa, corr);
    r.correlation = Some(corr);
    r.flip_probability = Some((1.0 - corr) / 2.0);
    r.tau = Some(list.tau);
    r.epsilon = Some(list.tau * list.tau / 4.0);
    r.delta = Some(list.delta);
    r.queries = list.queries;
    r.diag("listed_weight", list.total_weight());
    if completion == MassCompletion::Parseval {
        r.diag("completed_weight", residual);
    }
    if !list.complete {
        r.flag("incomplete-spectrum");
    }
    r.spectrum = Some(list.clone());
    Ok(r)
}

/// `sum_{S in L, A in S} w_S`, clamped to `[0, 1]`.
pub fn membership_influence(list: &SpectrumList, a: usize) -> f64 {
    list.entries().iter().filter(|e| e.subset.contains(a)).map(|e| e.weight).sum::<f64>().clamp(0.0, 1.0)
}

/// `a G^2 + b G + c = 0` with `a = 2 alpha (1 - alpha)`, `b = (1 - 2p)(1 - 2 alpha)`,
/// `c = 2p(1 - p) - Inf`, where `G = P[h = 1 | x_A = 1] - P[h = 1 | x_A = -1]`
/// and `Inf` is the probability that an independent pair drawn from opposite
/// groups gets different labels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GfQuadratic {
    pub alpha: f64,
    pub p: f64,
    pub influence: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Signed estimate of `G` used to pick a root; `None` takes the `+sqrt` root.
    pub hint: Option<f64>,
}

impl GfQuadratic {
    pub fn new(alpha: f64, p: f64, influence: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(AuditError::DegenerateGroup(format!("alpha = {alpha}; both groups need positive mass")));
        }
        if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&influence) {
            return Err(AuditError::InvalidParameter(format!("p = {p}, Inf = {influence} must lie in [0, 1]")));
        }
        Ok(Self {
            alpha,
            p,
            influence,
            a: 2.0 * alpha * (1.0 - alpha),
            b: (1.0 - 2.0 * p) * (1.0 - 2.0 * alpha),
            c: 2.0 * p * (1.0 - p) - influence,
            hint: None,
        })
    }

    /// Inputs from coefficients: `p = (1 + hat h(empty)) / 2`.
    pub fn from_coefficients(alpha: f64, empty_coefficient: f64, influence: f64) -> Result<Self> {
        Self::new(alpha, (1.0 + empty_coefficient) / 2.0, influence)
    }

    pub fn with_hint(mut self, hint: f64) -> Self {
        self.hint = Some(hint);
        self
    }

    /// `4 alpha^2 + 4 p^2 - 4 alpha - 4 p + 1 + 8 alpha (1 - alpha) Inf`, i.e. `b^2 - 4ac`.
    pub fn discriminant(&self) -> f64 {
        let (al, p) = (self.alpha, self.p);
        4.0 * al * al + 4.0 * p * p - 4.0 * al - 4.0 * p + 1.0 + 8.0 * al * (1.0 - al) * self.influence
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GfSolution {
    /// `|root|` clamped to `[0, 1]`.
    pub value: f64,
    /// The chosen root before absolute value and clamping.
    pub root: f64,
    /// The other root.
    pub other_root: f64,
    pub discriminant: f64,
    pub discriminant_clamped: bool,
    pub out_of_range: bool,
}

pub fn solve_gf_quadratic(q: &GfQuadratic) -> GfSolution {
    let raw = q.discriminant();
    let disc = raw.max(0.0);
    let sq = disc.sqrt();
    let denom = 4.0 * q.alpha * (1.0 - q.alpha);
    let plus = (-q.b + sq) / denom;
    let minus = (-q.b - sq) / denom;
    let (root, other_root) = match q.hint {
        Some(h) if (minus - h).abs() < (plus - h).abs() => (minus, plus),
        _ => (plus, minus),
    };
    let out_of_range = root.abs() > 1.0 + 1e-12;
    GfSolution {
        value: root.abs().min(1.0),
        root,
        other_root,
        discriminant: raw,
        discriminant_clamped: raw < 0.0,
        out_of_range,
    }
}

/// Settings for the budgeted audit pipelines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AfaConfig {
    pub tau: f64,
    pub delta: f64,
    /// Share of the budget spent on the bucket search; the rest re-estimates.
    pub search_fraction: f64,
    pub completion: MassCompletion,
}

impl AfaConfig {
    pub fn new(tau: f64, delta: f64) -> Self {
        Self { tau, delta, search_fraction: 0.25, completion: MassCompletion::Parseval }
    }

    pub fn for_property(property: &PropertySpec) -> Self {
        match property {
            PropertySpec::StatisticalParity { .. } | PropertySpec::Multicalibration { .. } => Self::new(0.15, 0.05),
            _ => Self::new(0.1, 0.05),
        }
    }
}

fn split_budget(total: u64, fraction: f64) -> (usize, usize) {
    let search = ((total as f64) * fraction).floor() as usize;
    (search, total as usize - search)
}

/// Rob/IF with a fixed query budget: pooled bucket search, leaf re-estimation on
/// the remaining queries, then the spectral plug-in.
pub fn afa_spectral_audit(
    model: &ModelOracle,
    dist: &DistributionSpec,
    property: &PropertySpec,
    config: &AfaConfig,
    budget: &AuditBudget,
    rng: &mut RandomSource,
) -> Result<AuditReport> {
    let n = dist.dim();
    property.validate(n)?;
    if !model.is_binary() {
        return Err(AuditError::UnsupportedProperty(format!("{property} needs a binary model")));
    }
    let (search, leaf) = split_budget(budget.remaining(), config.search_fraction);
    // Below 1/tau^2 pooled points a weight of tau^2 is indistinguishable from noise.
    let min_search = (1.0 / (config.tau * config.tau)).ceil() as usize;
    if search < min_search {
        return Err(AuditError::Oracle(crate::error::OracleError::BudgetExceeded {
            requested: (min_search as f64 / config.search_fraction).ceil() as u64,
            remaining: budget.remaining(),
        }));
    }
    let gl = GlConfig::new(config.tau, config.delta).sampling(BucketSampling::Pooled { search, leaf });
    let list = goldreich_levin(model, dist, &gl, budget, rng)?;
    let mut r = spectral_report(property, &list, n, config.completion)?;
    if let DistributionSpec::Product(b) = dist {
        if b.iter().any(|&x| x != 0.0) {
            r.flag("biased-product: the spectral formula is exact only under uniform inputs");
        }
    }
    Ok(r)
}

/// Statistical parity from the spectrum around the sensitive coordinate.
///
/// A restricted bucket search (subsets containing `A`) spends `search_fraction`
/// of the budget. The rest labels counterfactual pairs `(z with x_A = +1,
/// z with x_A = -1)`, `z ~ D`, which give unbiased estimates of `hat h(empty)`,
/// the signed gap `G` and the squared coefficients of the listed subsets. The
/// quadratic is then solved on `(alpha, p, Inf_A)` with `G` choosing the root.
pub fn estimate_statistical_parity(
    model: &ModelOracle,
    dist: &DistributionSpec,
    a: usize,
    config: &AfaConfig,
    budget: &AuditBudget,
    rng: &mut RandomSource,
) -> Result<AuditReport> {
    let n = dist.dim();
    let property = PropertySpec::StatisticalParity { sensitive: a };
    property.validate(n)?;
    if !model.is_binary() {
        return Err(AuditError::UnsupportedProperty("statistical parity needs a binary model; use mc".into()));
    }
    if !dist.is_product() {
        return empirical_parity(model, dist, a, config, budget, rng);
    }
    let alpha = dist.prob_plus(a);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(AuditError::DegenerateGroup(format!("P[x_{} = 1] = {alpha}", a + 1)));
    }
    let start = budget.consumed();
    let basis = OrthonormalBasis::closed_form(dist)?;
    let (search, rest) = split_budget(budget.remaining(), config.search_fraction);
    let pairs = rest / 2;
    if pairs < 2 {
        return Err(AuditError::Oracle(crate::error::OracleError::BudgetExceeded {
            requested: 4 + search as u64,
            remaining: budget.remaining(),
        }));
    }

    let mut list = if search >= 2 {
        let gl = GlConfig::new(config.tau, config.delta)
            .restrict_to(a)
            .sampling(BucketSampling::Pooled { search, leaf: 0 });
        goldreich_levin(model, dist, &gl, budget, rng)?
    } else {
        SpectrumList::new(n, config.tau, config.delta, Vec::new())
    };

    let mut prng = rng.derive(0x5350);
    let zs = dist.sample_many(pairs, &mut prng);
    let mut pts = Vec::with_capacity(2 * pairs);
    for z in &zs {
        pts.push(z.with(a, 1));
        pts.push(z.with(a, -1));
    }
    let ys = model.query_batch(&pts, budget)?;
    let hp: Vec<f64> = ys.iter().step_by(2).map(|&y| y as f64).collect();
    let hm: Vec<f64> = ys.iter().skip(1).step_by(2).map(|&y| y as f64).collect();
    let m = pairs as f64;
    let empty = hp.iter().zip(&hm).map(|(p, q)| alpha * p + (1.0 - alpha) * q).sum::<f64>() / m;
    let gap = hp.iter().zip(&hm).map(|(p, q)| (p - q) / 2.0).sum::<f64>() / m;
    let sigma = 2.0 * (alpha * (1.0 - alpha)).sqrt();

    // Squared coefficients of listed subsets (and {A}) from the same pairs, two halves.
    let half = pairs / 2;
    let mut subsets = list.subsets();
    if !subsets.contains(&SubsetIndex::singleton(a)) {
        subsets.push(SubsetIndex::singleton(a));
    }
    let entries: Vec<SpectrumEntry> = subsets
        .iter()
        .map(|&s| {
            let rest = s.remove(a);
            let term = |j: usize| basis.eval(rest, zs[j]) * (hp[j] - hm[j]) * sigma / 2.0;
            let m1 = (0..half).map(term).sum::<f64>() / half as f64;
            let m2 = (half..pairs).map(term).sum::<f64>() / (pairs - half) as f64;
            SpectrumEntry { subset: s, weight: (m1 * m2).clamp(0.0, 1.0 + WEIGHT_SLACK), samples: pairs }
        })
        .collect();
    let complete = list.complete;
    let tested = list.buckets_tested;
    list = SpectrumList::new(n, config.tau, config.delta, entries);
    list.complete = complete;
    list.buckets_tested = tested;
    list.restricted_to = Some(a);
    list.queries = budget.consumed() - start;

    // Conditional label means E[h | x_A = +-1] and the independent-pair influence.
    let plus = (empty + gap * (1.0 - (2.0 * alpha - 1.0))).clamp(-1.0, 1.0);
    let minus = (empty - gap * (1.0 + (2.0 * alpha - 1.0))).clamp(-1.0, 1.0);
    let influence = ((1.0 - plus * minus) / 2.0).clamp(0.0, 1.0);
    let p = ((1.0 + empty) / 2.0).clamp(0.0, 1.0);
    let q = GfQuadratic::new(alpha, p, influence)?;
    let hinted = solve_gf_quadratic(&q.with_hint(gap));
    let plain = solve_gf_quadratic(&q);

    let mut r = AuditReport::new(property, Method::Afa, hinted.value);
    r.tau = Some(config.tau);
    r.epsilon = Some(config.tau * config.tau / 4.0);
    r.delta = Some(config.delta);
    r.queries = budget.consumed() - start;
    r.diag("alpha", alpha);
    r.diag("p", p);
    r.diag("influence", influence);
    r.diag("signed_gap", gap);
    r.diag("discriminant", hinted.discriminant);
    r.diag("plus_branch_root", plain.value);
    r.diag("spectral_membership_weight", membership_influence(&list, a));
    if basis.is_parity() {
        r.diag("uniform_shortcut", list.weight(SubsetIndex::singleton(a)).unwrap_or(0.0).sqrt());
    }
    if hinted.discriminant_clamped {
        r.flag("negative-discriminant-clamped");
    }
    if hinted.out_of_range {
        r.flag("root-out-of-range");
    }
    if !list.complete {
        r.flag("incomplete-spectrum");
    }
    r.spectrum = Some(list);
    Ok(r)
}

/// Empirical inputs: no coordinate independence, so the group rates come from
/// plain draws of `D` and `alpha` from the same sample.
fn empirical_parity(
    model: &ModelOracle,
    dist: &DistributionSpec,
    a: usize,
    config: &AfaConfig,
    budget: &AuditBudget,
    rng: &mut RandomSource,
) -> Result<AuditReport> {
    let start = budget.consumed();
    let m = budget.remaining() as usize;
    let xs = dist.sample_many(m, rng);
    let ys = model.query_batch(&xs, budget)?;
    let (mut np, mut nm, mut pp, mut pm) = (0.0, 0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let pos = (*y == 1) as i32 as f64;
        if x.get(a) > 0 {
            np += 1.0;
            pp += pos;
        } else {
            nm += 1.0;
            pm += pos;
        }
    }
    if np == 0.0 || nm == 0.0 {
        return Err(AuditError::DegenerateGroup(format!("no draws with x_{} = {}", a + 1, if np == 0.0 { "+1" } else { "-1" })));
    }
    let alpha = np / (np + nm);
    let (p1, p0) = (pp / np, pm / nm);
    let p = (pp + pm) / (np + nm);
    let influence = p1 * (1.0 - p0) + p0 * (1.0 - p1);
    let q = GfQuadratic::new(alpha, p, influence)?;
    let sol = solve_gf_quadratic(&q.with_hint(p1 - p0));
    let mut r = AuditReport::new(PropertySpec::StatisticalParity { sensitive: a }, Method::Afa, sol.value);
    r.tau = Some(config.tau);
    r.delta = Some(config.delta);
    r.queries = budget.consumed() - start;
    r.diag("alpha", alpha);
    r.diag("p", p);
    r.diag("influence", influence);
    r.diag("signed_gap", p1 - p0);
    r.flag("empirical-plugin");
    Ok(r)
}

/// Multiclass parity: for each label pair `(i, j)` the binary restriction to
/// `h in {i, j}` (label `i` coded +1) is audited on the conditioned inputs; the
/// maximum over pairs is returned. Group counts come from one shared labeled pool.
pub fn estimate_multiclass_sp(
    model: &ModelOracle,
    dist: &DistributionSpec,
    a: usize,
    config: &AfaConfig,
    budget: &AuditBudget,
    rng: &mut RandomSource,
) -> Result<AuditReport> {
    let n = dist.dim();
    let property = PropertySpec::Multicalibration { sensitive: a };
    property.validate(n)?;
    let k = model.arity();
    if k < 3 {
        return Err(AuditError::UnsupportedProperty(format!("multiclass parity needs >= 3 labels, model has {k}")));
    }
    let start = budget.consumed();
    let m = budget.remaining() as usize;
    let xs = dist.sample_many(m, rng);
    let ys = model.query_batch(&xs, budget)?;
    // counts[g][label], g = 0 for x_A = +1.
    let mut counts = vec![vec![0.0f64; k]; 2];
    for (x, y) in xs.iter().zip(&ys) {
        counts[(x.get(a) < 0) as usize][*y as usize] += 1.0;
    }
    let mut best: Option<(f64, usize, usize, GfSolution)> = None;
    let mut r = AuditReport::new(property, Method::Afa, 0.0);
    for i in 0..k {
        for j in i + 1..k {
            let (pi, pj, mi, mj) = (counts[0][i], counts[0][j], counts[1][i], counts[1][j]);
            let (np, nm) = (pi + pj, mi + mj);
            if np == 0.0 || nm == 0.0 {
                r.flag(format!("skipped-pair-{i}-{j}"));
                continue;
            }
            let alpha = np / (np + nm);
            let (p1, p0) = (pi / np, mi / nm);
            let p = (pi + mi) / (np + nm);
            let influence = p1 * (1.0 - p0) + p0 * (1.0 - p1);
            let sol = solve_gf_quadratic(&GfQuadratic::new(alpha, p, influence)?.with_hint(p1 - p0));
            if best.as_ref().is_none_or(|b| sol.value > b.0) {
                best = Some((sol.value, i, j, sol));
            }
        }
    }
    let (value, i, j, _) = best.ok_or(AuditError::NoValidPair)?;
    r.estimate = value;
    r.tau = Some(config.tau);
    r.delta = Some(config.delta);
    r.queries = budget.consumed() - start;
    r.diag("arg_pair_first", i as f64);
    r.diag("arg_pair_second", j as f64);
    Ok(r)
}
