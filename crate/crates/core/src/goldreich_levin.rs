//! Adaptive bucket-tree search for the significant Fourier coefficients.
//!
//! A bucket `B^{S,k}` collects every subset that agrees with `S` on the first `k`
//! coordinates; its weight is the squared-coefficient mass of its members. The
//! search walks the tree breadth first, splitting on the next coordinate and
//! dropping buckets whose estimated weight is below `tau^2 / 2`.
//!
//! Two sampling modes are offered. The paired mode spends fresh queries on every
//! bucket (`h(x z) h(x' z) psi_S(x) psi_S(x')` with a shared suffix `z`), with the
//! per-bucket count from a Hoeffding schedule. The pooled mode labels one i.i.d.
//! pool up front and scores every bucket from it with a suffix-collision
//! U-statistic, which is what a fixed query budget calls for.

use std::fmt;

use rayon::prelude::*;

use crate::basis::OrthonormalBasis;
use crate::dist::DistributionSpec;
use crate::error::{AuditError, OracleError, Result};
use crate::estimators::estimate_squared_coefficients;
use crate::models::{AuditBudget, ModelOracle};
use crate::point::{full_mask, PointVector, SubsetIndex};
use crate::rng::RandomSource;

/// Reported weights are clamped to `[-WEIGHT_SLACK, 1 + WEIGHT_SLACK]`.
pub const WEIGHT_SLACK: f64 = 0.25;

const CHUNK_PAIRS: usize = 8192;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bucket {
    pub prefix: SubsetIndex,
    pub depth: usize,
    /// Clamped estimate.
    pub weight: f64,
    /// Unclamped estimate, kept for diagnostics.
    pub raw_weight: f64,
    pub samples: usize,
}

impl Bucket {
    pub fn new(prefix: SubsetIndex, depth: usize) -> Self {
        Self { prefix, depth, weight: f64::NAN, raw_weight: f64::NAN, samples: 0 }
    }

    fn scored(mut self, raw: f64, samples: usize) -> Self {
        self.raw_weight = raw;
        self.weight = raw.clamp(-WEIGHT_SLACK, 1.0 + WEIGHT_SLACK);
        self.samples = samples;
        self
    }

    /// Member subsets: the prefix plus any subset of coordinates `depth..n`.
    pub fn contains(&self, s: SubsetIndex) -> bool {
        s.mask() & full_mask(self.depth) == self.prefix.mask()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumEntry {
    pub subset: SubsetIndex,
    /// Estimate of `hat h(S)^2`, in `[0, 1 + WEIGHT_SLACK]`.
    pub weight: f64,
    pub samples: usize,
}

/// Output of the search: subsets with squared-coefficient estimates, sorted by
/// decreasing weight (ties by mask).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumList {
    pub n: usize,
    pub tau: f64,
    pub delta: f64,
    pub restricted_to: Option<usize>,
    /// False when the budget ran out before the search finished.
    pub complete: bool,
    pub queries: u64,
    pub buckets_tested: usize,
    entries: Vec<SpectrumEntry>,
}

impl SpectrumList {
    pub fn new(n: usize, tau: f64, delta: f64, mut entries: Vec<SpectrumEntry>) -> Self {
        entries.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.subset.cmp(&b.subset)));
        entries.dedup_by_key(|e| e.subset);
        Self { n, tau, delta, restricted_to: None, complete: true, queries: 0, buckets_tested: 0, entries }
    }

    /// Every subset whose exact squared coefficient exceeds `min_weight`.
    pub fn from_exact(spectrum: &crate::basis::ExactSpectrum, min_weight: f64) -> Self {
        let entries = spectrum
            .iter()
            .filter(|(_, c)| c * c > min_weight)
            .map(|(s, c)| SpectrumEntry { subset: s, weight: c * c, samples: 0 })
            .collect();
        Self::new(spectrum.dim(), min_weight.sqrt(), 0.0, entries)
    }

    pub fn entries(&self) -> &[SpectrumEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, s: SubsetIndex) -> bool {
        self.entries.iter().any(|e| e.subset == s)
    }

    pub fn weight(&self, s: SubsetIndex) -> Option<f64> {
        self.entries.iter().find(|e| e.subset == s).map(|e| e.weight)
    }

    pub fn subsets(&self) -> Vec<SubsetIndex> {
        self.entries.iter().map(|e| e.subset).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }
}

impl fmt::Display for SpectrumList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n: {}", self.n)?;
        writeln!(f, "tau: {}", self.tau)?;
        writeln!(f, "delta: {}", self.delta)?;
        match self.restricted_to {
            Some(a) => writeln!(f, "restricted_to: {}", a + 1)?,
            None => writeln!(f, "restricted_to: none")?,
        }
        writeln!(f, "complete: {}", self.complete)?;
        writeln!(f, "queries: {}", self.queries)?;
        writeln!(f, "buckets_tested: {}", self.buckets_tested)?;
        writeln!(f, "entries: {}", self.entries.len())?;
        for e in &self.entries {
            writeln!(f, "  {} {:.6} {}", e.subset, e.weight, e.samples)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BucketSampling {
    /// Paired queries per bucket, count from [`hoeffding_samples`].
    Hoeffding,
    /// Paired queries per bucket, fixed count.
    Fixed(usize),
    /// One labeled pool of `search` points for the whole tree, then a fresh
    /// `leaf`-point batch to re-estimate the surviving singletons.
    Pooled { search: usize, leaf: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlConfig {
    pub tau: f64,
    pub delta: f64,
    pub restrict_to: Option<usize>,
    pub sampling: BucketSampling,
    /// Stop testing leaves once their running weight exceeds `1 - tau^2`.
    pub early_stop: bool,
}

impl GlConfig {
    pub fn new(tau: f64, delta: f64) -> Self {
        Self { tau, delta, restrict_to: None, sampling: BucketSampling::Hoeffding, early_stop: true }
    }

    pub fn restrict_to(mut self, a: usize) -> Self {
        self.restrict_to = Some(a);
        self
    }

    pub fn sampling(mut self, s: BucketSampling) -> Self {
        self.sampling = s;
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(AuditError::InvalidParameter(format!("tau = {} outside (0, 1]", self.tau)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(AuditError::InvalidParameter(format!("delta = {} outside (0, 1)", self.delta)));
        }
        if let Some(a) = self.restrict_to {
            if a >= n {
                return Err(AuditError::InvalidParameter(format!("restrict_to = {} outside 1..={n}", a + 1)));
            }
        }
        match self.sampling {
            BucketSampling::Fixed(0) => Err(AuditError::InvalidParameter("per-bucket sample count is 0".into())),
            BucketSampling::Pooled { search, .. } if search < 2 => {
                Err(AuditError::InvalidParameter("pooled search needs at least 2 points".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Pairs per bucket: `ceil(8 / tau^4 * ln(2 n (2 / tau^2) / delta))`.
pub fn hoeffding_samples(tau: f64, delta: f64, n: usize) -> usize {
    let buckets = 2.0 * n as f64 * (2.0 / (tau * tau));
    (8.0 / tau.powi(4) * (buckets / delta).ln()).ceil().max(1.0) as usize
}

fn require_product(dist: &DistributionSpec) -> Result<()> {
    if dist.is_product() {
        Ok(())
    } else {
        Err(AuditError::UnsupportedDistribution(
            "the bucket search needs independent coordinates (Uniform or Product)".into(),
        ))
    }
}

/// Unbiased paired estimate of `W^{S,k}`; returns the raw (unclamped) mean.
pub fn estimate_bucket_weight(
    model: &ModelOracle,
    bucket: &Bucket,
    dist: &DistributionSpec,
    m: usize,
    rng: &mut RandomSource,
    budget: &AuditBudget,
) -> Result<f64> {
    require_product(dist)?;
    if m == 0 {
        return Err(AuditError::InvalidParameter("m must be at least 1".into()));
    }
    let basis = OrthonormalBasis::closed_form(dist)?;
    paired_weight(model, &basis, bucket.prefix, bucket.depth, m, rng, budget)
}

fn paired_weight(
    model: &ModelOracle,
    basis: &OrthonormalBasis,
    prefix: SubsetIndex,
    depth: usize,
    m: usize,
    rng: &mut RandomSource,
    budget: &AuditBudget,
) -> Result<f64> {
    let dist = basis.dist();
    let pmask = full_mask(depth);
    let mut sum = 0.0;
    let mut done = 0usize;
    let mut pts: Vec<PointVector> = Vec::with_capacity(2 * CHUNK_PAIRS.min(m));
    while done < m {
        let c = CHUNK_PAIRS.min(m - done);
        pts.clear();
        for _ in 0..c {
            let z = dist.sample(rng);
            pts.push(dist.resample_coords(z, pmask, rng));
            pts.push(dist.resample_coords(z, pmask, rng));
        }
        let ys = model.query_batch(&pts, budget).map_err(|source| AuditError::PartialEstimate {
            completed: done,
            requested: m,
            partial: (done > 0).then(|| sum / done as f64),
            source,
        })?;
        for (pair, y) in pts.chunks_exact(2).zip(ys.chunks_exact(2)) {
            let psi = basis.eval(prefix, pair[0]) * basis.eval(prefix, pair[1]);
            sum += (y[0] * y[1]) as f64 * psi;
        }
        done += c;
    }
    Ok(sum / m as f64)
}

/// Labeled i.i.d. pool scored by suffix collisions.
struct Pool {
    points: Vec<PointVector>,
    labels: Vec<f64>,
}

impl Pool {
    /// Order of pool indices grouped by the suffix `depth..n`, with each group's
    /// bounds and suffix probability.
    fn groups(&self, dist: &DistributionSpec, depth: usize) -> (Vec<usize>, Vec<(usize, usize, f64)>) {
        let key = |i: usize| self.points[i].neg_mask() >> depth;
        let mut order: Vec<usize> = (0..self.points.len()).collect();
        order.sort_by_key(|&i| key(i));
        let n = dist.dim();
        let suffix_prob = |x: PointVector| -> f64 {
            (depth..n)
                .map(|j| {
                    let p = dist.prob_plus(j);
                    if x.get(j) > 0 {
                        p
                    } else {
                        1.0 - p
                    }
                })
                .product()
        };
        let mut groups = Vec::new();
        let mut start = 0;
        while start < order.len() {
            let k = key(order[start]);
            let mut end = start + 1;
            while end < order.len() && key(order[end]) == k {
                end += 1;
            }
            groups.push((start, end, suffix_prob(self.points[order[start]])));
            start = end;
        }
        (order, groups)
    }

    fn weight(&self, basis: &OrthonormalBasis, prefix: SubsetIndex, order: &[usize], groups: &[(usize, usize, f64)]) -> f64 {
        let m = self.points.len() as f64;
        let mut total = 0.0;
        for &(start, end, p) in groups {
            if end - start < 2 || p <= 0.0 {
                continue;
            }
            let (mut s1, mut s2) = (0.0, 0.0);
            for &i in &order[start..end] {
                let a = self.labels[i] * basis.eval(prefix, self.points[i]);
                s1 += a;
                s2 += a * a;
            }
            total += (s1 * s1 - s2) / p;
        }
        total / (m * (m - 1.0))
    }
}

/// The bucket-tree search.
pub fn goldreich_levin(
    model: &ModelOracle,
    dist: &DistributionSpec,
    config: &GlConfig,
    budget: &AuditBudget,
    rng: &mut RandomSource,
) -> Result<SpectrumList> {
    require_product(dist)?;
    let n = dist.dim();
    if model.dim() != n {
        return Err(AuditError::InvalidParameter(format!("model has dimension {}, distribution {n}", model.dim())));
    }
    config.validate(n)?;
    let basis = OrthonormalBasis::closed_form(dist)?;
    let tau2 = config.tau * config.tau;
    let threshold = tau2 / 2.0;
    let max_frontier = (4.0 / tau2).ceil() as usize;
    let start_consumed = budget.consumed();
    let mut tested = 0usize;
    let mut complete = true;
    let root = rng.derive(0x474c);

    let pool = match config.sampling {
        BucketSampling::Pooled { search, .. } => {
            let mut prng = root.derive(1);
            let points = dist.sample_many(search, &mut prng);
            let labels = model.query_batch(&points, budget)?.into_iter().map(f64::from).collect();
            Some(Pool { points, labels })
        }
        _ => None,
    };
    let m = match config.sampling {
        BucketSampling::Hoeffding => hoeffding_samples(config.tau, config.delta, n),
        BucketSampling::Fixed(m) => m,
        BucketSampling::Pooled { search, .. } => search,
    };

    let mut frontier: Vec<Bucket> = vec![Bucket::new(SubsetIndex::EMPTY, 0).scored(1.0, 0)];
    let mut reached_leaves = true;
    for k in 0..n {
        let children: Vec<Bucket> = frontier
            .iter()
            .flat_map(|b| {
                let keep_out = config.restrict_to != Some(k);
                let out = keep_out.then(|| Bucket::new(b.prefix, k + 1));
                out.into_iter().chain(std::iter::once(Bucket::new(b.prefix.insert(k), k + 1)))
            })
            .collect();
        let last = k + 1 == n;

        let scored: Vec<Bucket> = if let Some(pool) = &pool {
            let (order, groups) = pool.groups(dist, k + 1);
            children
                .par_iter()
                .map(|c| c.scored(pool.weight(&basis, c.prefix, &order, &groups), pool.points.len()))
                .collect()
        } else if last && config.early_stop {
            let mut out = Vec::with_capacity(children.len());
            let mut running = 0.0;
            for c in &children {
                if running > 1.0 - tau2 {
                    break;
                }
                if budget.remaining() < 2 * m as u64 {
                    complete = false;
                    break;
                }
                let mut r = root.derive(bucket_key(c));
                let w = paired_weight(model, &basis, c.prefix, c.depth, m, &mut r, budget)?;
                let b = c.scored(w, m);
                if b.raw_weight >= threshold {
                    running += b.weight;
                }
                out.push(b);
            }
            out
        } else {
            if budget.remaining() < (2 * m * children.len()) as u64 {
                complete = false;
                reached_leaves = false;
                break;
            }
            children
                .par_iter()
                .map(|c| {
                    let mut r = root.derive(bucket_key(c));
                    paired_weight(model, &basis, c.prefix, c.depth, m, &mut r, budget).map(|w| c.scored(w, m))
                })
                .collect::<Result<Vec<_>>>()?
        };
        tested += scored.len();
        let mut survivors: Vec<Bucket> = scored.into_iter().filter(|b| b.raw_weight >= threshold).collect();
        if survivors.len() > max_frontier {
            survivors.sort_by(|a, b| b.raw_weight.total_cmp(&a.raw_weight).then(a.prefix.cmp(&b.prefix)));
            survivors.truncate(max_frontier);
        }
        survivors.sort_by_key(|b| b.prefix);
        frontier = survivors;
        if frontier.is_empty() {
            break;
        }
    }

    let mut entries = Vec::new();
    if reached_leaves && !frontier.is_empty() && frontier[0].depth == n {
        let subsets: Vec<SubsetIndex> = frontier.iter().map(|b| b.prefix).collect();
        let (m1, m2) = match config.sampling {
            BucketSampling::Pooled { leaf, .. } => (leaf / 2, leaf - leaf / 2),
            _ => (m, m),
        };
        let fresh = if m1 >= 1 && m2 >= 1 && budget.remaining() >= (m1 + m2) as u64 {
            let mut r = root.derive(2);
            Some(estimate_squared_coefficients(model, &basis, &subsets, m1, m2, &mut r, budget)?)
        } else {
            if m1 >= 1 {
                complete = false;
            }
            None
        };
        for (j, b) in frontier.iter().enumerate() {
            let (w, samples) = match &fresh {
                Some(ws) => (ws[j], m1 + m2),
                None => (b.raw_weight, b.samples),
            };
            if w >= threshold {
                entries.push(SpectrumEntry { subset: b.prefix, weight: w.clamp(0.0, 1.0 + WEIGHT_SLACK), samples });
            }
        }
    }
    let mut list = SpectrumList::new(n, config.tau, config.delta, entries);
    list.restricted_to = config.restrict_to;
    list.complete = complete;
    list.queries = budget.consumed() - start_consumed;
    list.buckets_tested = tested;
    Ok(list)
}

fn bucket_key(b: &Bucket) -> u64 {
    (b.depth as u64) << 32 | b.prefix.mask() as u64
}

/// Whether an oracle error is a budget shortfall, possibly wrapped.
pub fn is_budget_error(e: &AuditError) -> bool {
    e.oracle_cause().is_some_and(OracleError::is_budget)
}
