//! Brute-force ground truth for small `n`.
//!
//! Rob/IF integrate the perturbation kernel per coordinate instead of enumerating
//! neighbours, so the cost is `O(n 2^n)` per kernel rather than `O(4^n)`.

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;

use crate::dist::{DistributionSpec, PerturbationSpec};
use crate::error::{AuditError, Result};
use crate::estimators::PropertySpec;
use crate::models::{AuditBudget, ModelOracle};
use crate::point::{PointVector, MAX_DIM};
use crate::rng::RandomSource;

/// Largest `n` for the Rob/IF kernels (the table over the whole cube is needed).
pub const MAX_KERNEL_DIM: usize = 12;
/// Largest `n` for group enumeration under Uniform/Product.
pub const MAX_GROUP_DIM: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct ExactResult {
    pub property: PropertySpec,
    /// Rob/IF: disagreement probability. SP/MC: parity gap.
    pub value: f64,
    pub correlation: Option<f64>,
    pub enumeration_size: usize,
    pub wall_ms: f64,
    /// Set when the value is a sampled reference rather than an enumeration.
    pub monte_carlo: bool,
}

impl fmt::Display for ExactResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "property: {}", self.property)?;
        writeln!(f, "method: {}", if self.monte_carlo { "MonteCarlo" } else { "Exact" })?;
        writeln!(f, "value: {:.9}", self.value)?;
        match self.correlation {
            Some(c) => writeln!(f, "correlation: {c:.9}")?,
            None => writeln!(f, "correlation: none")?,
        }
        writeln!(f, "enumeration_size: {}", self.enumeration_size)?;
        writeln!(f, "# wall_ms: {:.3}", self.wall_ms)
    }
}

fn binary_only(model: &ModelOracle, what: &str) -> Result<()> {
    if model.is_binary() {
        Ok(())
    } else {
        Err(AuditError::UnsupportedProperty(format!("{what} needs a binary model")))
    }
}

fn enumerate_failed(e: crate::error::OracleError) -> AuditError {
    AuditError::EnumerationFailed { completed: e.acknowledged() as usize, source: e }
}

/// Labels over the whole cube as `+-1` floats, indexed by negative mask.
fn cube_labels(model: &ModelOracle, n: usize) -> Result<Vec<f64>> {
    if n > MAX_KERNEL_DIM {
        return Err(AuditError::TooLarge { n, cap: MAX_KERNEL_DIM });
    }
    let pts: Vec<PointVector> = PointVector::enumerate(n)?.collect();
    Ok(model.label_all(&pts).map_err(enumerate_failed)?.into_iter().map(|y| y as f64).collect())
}

/// Apply the one-coordinate kernel `keep * g(x) + (1 - keep) * g(x with bit flipped)` on each bit of `mask`.
fn smooth(g: &mut [f64], mask: u32, keep: f64) {
    let mut m = mask;
    while m != 0 {
        let bit = 1usize << m.trailing_zeros();
        m &= m - 1;
        for x in 0..g.len() {
            if x & bit == 0 {
                let (u, v) = (g[x], g[x | bit]);
                g[x] = keep * u + (1.0 - keep) * v;
                g[x | bit] = keep * v + (1.0 - keep) * u;
            }
        }
    }
}

fn l_subsets(n: usize, l: usize) -> Vec<u32> {
    (0u32..(1u32 << n)).filter(|m| m.count_ones() as usize == l).collect()
}

/// `E[h(x) h(y)]` with `x ~ D`, `y ~ perturbation(x)`.
pub fn exact_correlation(model: &ModelOracle, dist: &DistributionSpec, pert: &PerturbationSpec) -> Result<f64> {
    let n = dist.dim();
    pert.validate(n)?;
    binary_only(model, "robustness / individual fairness")?;
    let h = cube_labels(model, n)?;
    let support = dist.support(MAX_KERNEL_DIM)?;
    let keep = (1.0 + pert.rho()) / 2.0;
    let against = |g: &[f64]| -> f64 {
        support.iter().map(|(x, p)| p * h[x.neg_mask() as usize] * g[x.neg_mask() as usize]).sum()
    };
    match *pert {
        PerturbationSpec::Flip { .. } => {
            let mut g = h.clone();
            smooth(&mut g, (1u32 << n) - 1, keep);
            Ok(against(&g))
        }
        PerturbationSpec::FlipL { l, .. } => {
            let subsets = l_subsets(n, l);
            let total: f64 = subsets
                .par_iter()
                .map(|&f| {
                    let mut g = h.clone();
                    smooth(&mut g, f, keep);
                    against(&g)
                })
                .collect::<Vec<_>>()
                .into_iter()
                .sum();
            Ok(total / subsets.len() as f64)
        }
    }
}

/// Weighted `(mass, positive mass)` for each sensitive group, `+1` group first.
fn group_masses(model: &ModelOracle, dist: &DistributionSpec, a: usize, positive: i32) -> Result<[(f64, f64); 2]> {
    let support = dist.support(MAX_GROUP_DIM)?;
    let pts: Vec<PointVector> = support.iter().map(|(x, _)| *x).collect();
    let ys = model.label_all(&pts).map_err(enumerate_failed)?;
    let mut g = [(0.0, 0.0); 2];
    for ((x, p), y) in support.iter().zip(ys) {
        let k = (x.get(a) < 0) as usize;
        g[k].0 += p;
        if y == positive {
            g[k].1 += p;
        }
    }
    Ok(g)
}

/// `(P[h = 1 | x_A = 1], P[h = 1 | x_A = -1], P[x_A = 1])`.
pub fn exact_group_rates(model: &ModelOracle, dist: &DistributionSpec, a: usize) -> Result<(f64, f64, f64)> {
    binary_only(model, "statistical parity")?;
    if a >= dist.dim() {
        return Err(AuditError::InvalidParameter(format!("sensitive coordinate {} outside 1..={}", a + 1, dist.dim())));
    }
    let [(mp, hp), (mm, hm)] = group_masses(model, dist, a, 1)?;
    if mp <= 0.0 || mm <= 0.0 {
        return Err(AuditError::DegenerateGroup(format!("P[x_{} = 1] = {mp}", a + 1)));
    }
    Ok((hp / mp, hm / mm, mp / (mp + mm)))
}

/// `|P[h = 1 | x_A = 1] - P[h = 1 | x_A = -1]|`.
pub fn exact_statistical_parity(model: &ModelOracle, dist: &DistributionSpec, a: usize) -> Result<f64> {
    let (p1, p0, _) = exact_group_rates(model, dist, a)?;
    Ok((p1 - p0).abs())
}

/// `(p, G)`: overall positive rate and the signed gap.
pub fn exact_positive_rate_and_gap(model: &ModelOracle, dist: &DistributionSpec, a: usize) -> Result<(f64, f64)> {
    let (p1, p0, alpha) = exact_group_rates(model, dist, a)?;
    Ok((alpha * p1 + (1.0 - alpha) * p0, p1 - p0))
}

/// Probability that `x ~ D | x_A = 1` and an independent `y ~ D | y_A = -1` get different labels.
pub fn exact_membership_influence(model: &ModelOracle, dist: &DistributionSpec, a: usize) -> Result<f64> {
    let (p1, p0, _) = exact_group_rates(model, dist, a)?;
    Ok(p1 * (1.0 - p0) + p0 * (1.0 - p1))
}

/// `P_{x ~ D}[h(x) != h(x with coordinate A flipped)]`.
pub fn exact_flip_influence(model: &ModelOracle, dist: &DistributionSpec, a: usize) -> Result<f64> {
    binary_only(model, "flip influence")?;
    let support = dist.support(MAX_GROUP_DIM)?;
    let pts: Vec<PointVector> = support.iter().map(|(x, _)| *x).collect();
    let flipped: Vec<PointVector> = pts.iter().map(|x| x.flip(a)).collect();
    let ys = model.label_all(&pts).map_err(enumerate_failed)?;
    let zs = model.label_all(&flipped).map_err(enumerate_failed)?;
    Ok(support.iter().zip(ys.iter().zip(&zs)).filter(|(_, (y, z))| y != z).map(|((_, p), _)| p).sum())
}

/// Max over label pairs `(i, j)` of the parity gap of the binary restriction to
/// `h in {i, j}`, conditioned on that restriction. Pairs with an empty group are skipped.
pub fn exact_multiclass_sp(model: &ModelOracle, dist: &DistributionSpec, a: usize) -> Result<(f64, (usize, usize))> {
    let support = dist.support(MAX_GROUP_DIM)?;
    let pts: Vec<PointVector> = support.iter().map(|(x, _)| *x).collect();
    let ys = model.label_all(&pts).map_err(enumerate_failed)?;
    let k = model.arity();
    let mut mass = vec![[0.0f64; 2]; k];
    for ((x, p), y) in support.iter().zip(ys) {
        mass[y as usize][(x.get(a) < 0) as usize] += p;
    }
    let mut best: Option<(f64, (usize, usize))> = None;
    for i in 0..k {
        for j in i + 1..k {
            let (np, nm) = (mass[i][0] + mass[j][0], mass[i][1] + mass[j][1]);
            if np <= 0.0 || nm <= 0.0 {
                continue;
            }
            let gap = (mass[i][0] / np - mass[i][1] / nm).abs();
            if best.is_none_or(|b| gap > b.0) {
                best = Some((gap, (i, j)));
            }
        }
    }
    best.ok_or(AuditError::NoValidPair)
}

/// Exact value of any supported property.
pub fn exact_property(model: &ModelOracle, dist: &DistributionSpec, property: &PropertySpec) -> Result<ExactResult> {
    let n = dist.dim();
    property.validate(n)?;
    if model.dim() != n {
        return Err(AuditError::InvalidParameter(format!("model has dimension {}, distribution has {n}", model.dim())));
    }
    let start = Instant::now();
    let (value, correlation, size) = match property {
        PropertySpec::Robustness { .. } | PropertySpec::IndividualFairness { .. } => {
            let pert = property.perturbation().expect("spectral property");
            let c = exact_correlation(model, dist, &pert)?;
            ((1.0 - c) / 2.0, Some(c), 1usize << n)
        }
        PropertySpec::StatisticalParity { sensitive } => {
            (exact_statistical_parity(model, dist, *sensitive)?, None, dist.support(MAX_GROUP_DIM)?.len())
        }
        PropertySpec::Multicalibration { sensitive } => {
            (exact_multiclass_sp(model, dist, *sensitive)?.0, None, dist.support(MAX_GROUP_DIM)?.len())
        }
    };
    Ok(ExactResult {
        property: *property,
        value,
        correlation,
        enumeration_size: size,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        monte_carlo: false,
    })
}

/// Sampled reference for dimensions beyond the enumeration caps.
pub fn monte_carlo_property(
    model: &ModelOracle,
    dist: &DistributionSpec,
    property: &PropertySpec,
    samples: usize,
    rng: &mut RandomSource,
) -> Result<ExactResult> {
    let n = dist.dim();
    property.validate(n)?;
    if n > MAX_DIM || samples == 0 {
        return Err(AuditError::InvalidParameter("monte-carlo reference needs at least one sample".into()));
    }
    let start = Instant::now();
    let budget = AuditBudget::unlimited();
    let xs = dist.sample_many(samples, rng);
    let ys = model.query_batch(&xs, &budget)?;
    let (value, correlation) = match property {
        PropertySpec::Robustness { .. } | PropertySpec::IndividualFairness { .. } => {
            let pert = property.perturbation().expect("spectral property");
            let mut prng = rng.derive(0x4d43);
            let zs = xs.iter().map(|x| crate::dist::perturb(*x, &pert, &mut prng)).collect::<Result<Vec<_>>>()?;
            let ws = model.query_batch(&zs, &budget)?;
            let f = ys.iter().zip(&ws).filter(|(a, b)| a != b).count() as f64 / samples as f64;
            (f, Some(1.0 - 2.0 * f))
        }
        PropertySpec::StatisticalParity { sensitive } | PropertySpec::Multicalibration { sensitive } => {
            let a = *sensitive;
            let k = model.arity();
            // Binary labels are -1/+1; bucket them as 0 (negative) and 1 (positive).
            let idx = |y: i32| if model.is_binary() { (y == 1) as usize } else { y as usize };
            let mut mass = vec![[0.0f64; 2]; k];
            for (x, y) in xs.iter().zip(&ys) {
                mass[idx(*y)][(x.get(a) < 0) as usize] += 1.0;
            }
            let gap = |i: usize, j: usize| -> Option<f64> {
                let (np, nm) = (mass[i][0] + mass[j][0], mass[i][1] + mass[j][1]);
                (np > 0.0 && nm > 0.0).then(|| (mass[i][0] / np - mass[i][1] / nm).abs())
            };
            let v = if model.is_binary() {
                gap(1, 0).ok_or_else(|| AuditError::DegenerateGroup(format!("no draws in one group of x_{}", a + 1)))?
            } else {
                (0..k)
                    .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
                    .filter_map(|(i, j)| gap(i, j))
                    .reduce(f64::max)
                    .ok_or(AuditError::NoValidPair)?
            };
            (v, None)
        }
    };
    Ok(ExactResult {
        property: *property,
        value,
        correlation,
        enumeration_size: samples,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        monte_carlo: true,
    })
}
