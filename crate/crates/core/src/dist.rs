//! Input distributions over `{-1, +1}^n` and the perturbation mechanisms.

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::RngCore;

use crate::error::{AuditError, Result};
use crate::point::{check_dim, full_mask, PointVector};
use crate::rng::RandomSource;

/// Empirical distribution: weighted atoms, duplicates merged.
#[derive(Clone, Debug)]
pub struct Empirical {
    n: usize,
    atoms: Vec<PointVector>,
    weights: Vec<f64>,
    lookup: HashMap<PointVector, usize>,
    sampler: WeightedIndex<f64>,
}

impl Empirical {
    /// Weights must be strictly positive and sum to 1 within 1e-12; pass them
    /// through [`Empirical::from_counts`] when they are raw frequencies.
    pub fn new(atoms: Vec<PointVector>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(AuditError::InvalidDistribution("empirical distribution has empty support".into()));
        }
        if atoms.len() != weights.len() {
            return Err(AuditError::InvalidDistribution(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        let n = atoms[0].dim();
        check_dim(n)?;
        if let Some(bad) = atoms.iter().find(|a| a.dim() != n) {
            return Err(AuditError::InvalidDistribution(format!(
                "atom {bad} has dimension {}, expected {n}",
                bad.dim()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(AuditError::InvalidDistribution(format!("weight {w} is not strictly positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(AuditError::InvalidDistribution(format!("weights sum to {total}, expected 1")));
        }

        let mut merged: Vec<PointVector> = Vec::with_capacity(atoms.len());
        let mut merged_w: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut lookup = HashMap::with_capacity(atoms.len());
        for (a, w) in atoms.into_iter().zip(weights) {
            match lookup.get(&a) {
                Some(&k) => merged_w[k] += w,
                None => {
                    lookup.insert(a, merged.len());
                    merged.push(a);
                    merged_w.push(w);
                }
            }
        }
        let sampler = WeightedIndex::new(&merged_w)
            .map_err(|e| AuditError::InvalidDistribution(format!("cannot build sampler: {e}")))?;
        Ok(Self { n, atoms: merged, weights: merged_w, lookup, sampler })
    }

    /// Normalize positive counts (or any positive masses) into weights.
    pub fn from_counts(atoms: Vec<PointVector>, counts: &[f64]) -> Result<Self> {
        let total: f64 = counts.iter().sum();
        if !(total > 0.0) {
            return Err(AuditError::InvalidDistribution("counts sum to zero".into()));
        }
        let weights: Vec<f64> = counts.iter().map(|c| c / total).collect();
        // Renormalizing can leave a few ulps of slack; fold it into the largest atom.
        let mut weights = weights;
        let drift = 1.0 - weights.iter().sum::<f64>();
        if let Some(k) = (0..weights.len()).max_by(|&a, &b| weights[a].total_cmp(&weights[b])) {
            weights[k] += drift;
        }
        Self::new(atoms, weights)
    }

    pub fn atoms(&self) -> &[PointVector] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

impl PartialEq for Empirical {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.atoms == other.atoms && self.weights == other.weights
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DistributionSpec {
    Uniform(usize),
    /// `biases[i] = E[x_i]`, coordinates independent.
    Product(Vec<f64>),
    Empirical(Empirical),
}

impl DistributionSpec {
    pub fn uniform(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(DistributionSpec::Uniform(n))
    }

    pub fn product(biases: Vec<f64>) -> Result<Self> {
        check_dim(biases.len())?;
        if let Some(b) = biases.iter().find(|b| !(b.is_finite() && (-1.0..=1.0).contains(*b))) {
            return Err(AuditError::InvalidDistribution(format!("bias {b} outside [-1, 1]")));
        }
        Ok(DistributionSpec::Product(biases))
    }

    pub fn dim(&self) -> usize {
        match self {
            DistributionSpec::Uniform(n) => *n,
            DistributionSpec::Product(b) => b.len(),
            DistributionSpec::Empirical(e) => e.n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim())?;
        if let DistributionSpec::Product(b) = self {
            Self::product(b.clone())?;
        }
        Ok(())
    }

    /// Coordinates are independent (Uniform or Product).
    pub fn is_product(&self) -> bool {
        !matches!(self, DistributionSpec::Empirical(_))
    }

    /// `E[x_i]` for every coordinate.
    pub fn means(&self) -> Vec<f64> {
        match self {
            DistributionSpec::Uniform(n) => vec![0.0; *n],
            DistributionSpec::Product(b) => b.clone(),
            DistributionSpec::Empirical(e) => {
                let mut m = vec![0.0; e.n];
                for (a, w) in e.atoms.iter().zip(&e.weights) {
                    for (i, mi) in m.iter_mut().enumerate() {
                        *mi += w * a.get(i) as f64;
                    }
                }
                m
            }
        }
    }

    /// `P[x_i = +1]`.
    pub fn prob_plus(&self, i: usize) -> f64 {
        match self {
            DistributionSpec::Uniform(_) => 0.5,
            DistributionSpec::Product(b) => (1.0 + b[i]) / 2.0,
            DistributionSpec::Empirical(e) => {
                e.atoms.iter().zip(&e.weights).filter(|(a, _)| a.get(i) > 0).map(|(_, w)| *w).sum()
            }
        }
    }

    /// Probability mass of a single point.
    pub fn prob(&self, x: PointVector) -> f64 {
        match self {
            DistributionSpec::Uniform(n) => 0.5f64.powi(*n as i32),
            DistributionSpec::Product(b) => (0..b.len())
                .map(|i| if x.get(i) > 0 { (1.0 + b[i]) / 2.0 } else { (1.0 - b[i]) / 2.0 })
                .product(),
            DistributionSpec::Empirical(e) => e.lookup.get(&x).map_or(0.0, |&k| e.weights[k]),
        }
    }

    /// Every point of positive mass with its probability, in mask order for
    /// Uniform/Product and atom order for Empirical. Product enumeration is
    /// capped at `max_dim`.
    pub fn support(&self, max_dim: usize) -> Result<Vec<(PointVector, f64)>> {
        match self {
            DistributionSpec::Empirical(e) => Ok(e.atoms.iter().copied().zip(e.weights.iter().copied()).collect()),
            _ => {
                let n = self.dim();
                if n > max_dim {
                    return Err(AuditError::TooLarge { n, cap: max_dim });
                }
                Ok(PointVector::enumerate(n)?
                    .map(|x| (x, self.prob(x)))
                    .filter(|(_, p)| *p > 0.0)
                    .collect())
            }
        }
    }

    pub fn sample(&self, rng: &mut RandomSource) -> PointVector {
        match self {
            DistributionSpec::Uniform(n) => PointVector::raw(rng.next_u32() & full_mask(*n), *n),
            DistributionSpec::Product(b) => {
                let mut neg = 0u32;
                for (i, bi) in b.iter().enumerate() {
                    if rng.unit() >= (1.0 + bi) / 2.0 {
                        neg |= 1 << i;
                    }
                }
                PointVector::raw(neg, b.len())
            }
            DistributionSpec::Empirical(e) => e.atoms[e.sampler.sample(rng)],
        }
    }

    /// Redraw the coordinates in `mask` from their marginals, keeping the rest of `base`.
    /// Only meaningful for independent coordinates.
    pub(crate) fn resample_coords(&self, base: PointVector, mask: u32, rng: &mut RandomSource) -> PointVector {
        let n = base.dim();
        match self {
            DistributionSpec::Uniform(_) => {
                let fresh = rng.next_u32() & mask & full_mask(n);
                PointVector::raw((base.neg_mask() & !mask) | fresh, n)
            }
            DistributionSpec::Product(b) => {
                let mut neg = base.neg_mask() & !mask;
                let mut m = mask & full_mask(n);
                while m != 0 {
                    let i = m.trailing_zeros() as usize;
                    m &= m - 1;
                    if rng.unit() >= (1.0 + b[i]) / 2.0 {
                        neg |= 1 << i;
                    }
                }
                PointVector::raw(neg, n)
            }
            DistributionSpec::Empirical(_) => unreachable!("coordinate resampling needs independent coordinates"),
        }
    }

    pub fn sample_many(&self, m: usize, rng: &mut RandomSource) -> Vec<PointVector> {
        (0..m).map(|_| self.sample(rng)).collect()
    }
}

/// Perturbation mechanism producing a neighbour `y` of `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PerturbationSpec {
    /// Each coordinate kept with probability `(1 + rho) / 2`.
    Flip { rho: f64 },
    /// `l` distinct coordinates drawn uniformly; only those go through the Flip rule.
    FlipL { rho: f64, l: usize },
}

impl PerturbationSpec {
    pub fn rho(&self) -> f64 {
        match *self {
            PerturbationSpec::Flip { rho } | PerturbationSpec::FlipL { rho, .. } => rho,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let rho = self.rho();
        if !(rho.is_finite() && (-1.0..=1.0).contains(&rho)) {
            return Err(AuditError::InvalidParameter(format!("rho = {rho} outside [-1, 1]")));
        }
        if let PerturbationSpec::FlipL { l, .. } = *self {
            if l == 0 || l > n {
                return Err(AuditError::InvalidParameter(format!("l = {l} outside 1..={n}")));
            }
        }
        Ok(())
    }
}

pub fn perturb(x: PointVector, spec: &PerturbationSpec, rng: &mut RandomSource) -> Result<PointVector> {
    let n = x.dim();
    spec.validate(n)?;
    let keep = (1.0 + spec.rho()) / 2.0;
    let mut flips = 0u32;
    match *spec {
        PerturbationSpec::Flip { .. } => {
            for i in 0..n {
                if rng.unit() >= keep {
                    flips |= 1 << i;
                }
            }
        }
        PerturbationSpec::FlipL { l, .. } => {
            for i in index::sample(rng, n, l) {
                if rng.unit() >= keep {
                    flips |= 1 << i;
                }
            }
        }
    }
    Ok(x.flip_mask(flips))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_one_dim_support() {
        let d = DistributionSpec::uniform(1).unwrap();
        let mut rng = RandomSource::new(0);
        for _ in 0..50 {
            let x = d.sample(&mut rng);
            assert!(x.get(0) == 1 || x.get(0) == -1);
        }
        assert!(DistributionSpec::uniform(0).is_err());
        assert!(DistributionSpec::uniform(31).is_err());
    }

    #[test]
    fn saturated_product_is_all_ones() {
        let d = DistributionSpec::product(vec![1.0; 6]).unwrap();
        let mut rng = RandomSource::new(4);
        for _ in 0..100 {
            assert_eq!(d.sample(&mut rng), PointVector::ones(6).unwrap());
        }
    }

    #[test]
    fn bad_inputs_rejected() {
        assert!(DistributionSpec::product(vec![0.2, 1.5]).is_err());
        assert!(Empirical::new(vec![], vec![]).is_err());
        let a = PointVector::ones(2).unwrap();
        assert!(Empirical::new(vec![a], vec![0.9]).is_err());
        assert!(Empirical::new(vec![a, a.flip(0)], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn empirical_frequencies_within_three_sigma() {
        let atoms: Vec<PointVector> =
            [0u32, 3, 5, 6].iter().map(|&m| PointVector::from_neg_mask(m, 3).unwrap()).collect();
        let w = vec![0.1, 0.2, 0.3, 0.4];
        let d = DistributionSpec::Empirical(Empirical::new(atoms.clone(), w.clone()).unwrap());
        let mut rng = RandomSource::new(11);
        let trials = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..trials {
            let x = d.sample(&mut rng);
            counts[atoms.iter().position(|a| *a == x).unwrap()] += 1;
        }
        for k in 0..4 {
            let f = counts[k] as f64 / trials as f64;
            let sigma = (w[k] * (1.0 - w[k]) / trials as f64).sqrt();
            assert!((f - w[k]).abs() <= 3.0 * sigma, "atom {k}: {f} vs {}", w[k]);
        }
    }

    #[test]
    fn product_prob_sums_to_one() {
        let d = DistributionSpec::product(vec![0.3, -0.6, 0.0, 0.9]).unwrap();
        let total: f64 = d.support(12).unwrap().iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((d.prob_plus(1) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn flip_extremes() {
        let mut rng = RandomSource::new(2);
        let x = PointVector::from_signs(&[1, -1, 1, 1, -1]).unwrap();
        assert_eq!(perturb(x, &PerturbationSpec::Flip { rho: 1.0 }, &mut rng).unwrap(), x);
        assert_eq!(perturb(x, &PerturbationSpec::Flip { rho: -1.0 }, &mut rng).unwrap(), x.flip_mask(0b11111));
        assert!(perturb(x, &PerturbationSpec::FlipL { rho: 0.0, l: 6 }, &mut rng).is_err());
        assert!(perturb(x, &PerturbationSpec::Flip { rho: 1.5 }, &mut rng).is_err());
    }

    #[test]
    fn flip_correlation_per_coordinate() {
        let mut rng = RandomSource::new(21);
        let n = 4;
        let trials = 100_000;
        let spec = PerturbationSpec::Flip { rho: 0.5 };
        let d = DistributionSpec::uniform(n).unwrap();
        let mut acc = vec![0i64; n];
        for _ in 0..trials {
            let x = d.sample(&mut rng);
            let y = perturb(x, &spec, &mut rng).unwrap();
            for (i, a) in acc.iter_mut().enumerate() {
                *a += (x.get(i) * y.get(i)) as i64;
            }
        }
        for a in acc {
            let c = a as f64 / trials as f64;
            assert!((c - 0.5).abs() < 0.01, "{c}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = DistributionSpec::product(vec![0.1, 0.5, -0.3]).unwrap();
        let a = d.sample_many(64, &mut RandomSource::new(5));
        let b = d.sample_many(64, &mut RandomSource::new(5));
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn flip_l_touches_at_most_l(n in 1usize..16, l_raw in 1usize..16, rho in -1.0f64..=1.0, seed in any::<u64>(), xm in any::<u32>()) {
            let l = 1 + (l_raw - 1) % n;
            let x = PointVector::raw(xm & full_mask(n), n);
            let mut rng = RandomSource::new(seed);
            let y = perturb(x, &PerturbationSpec::FlipL { rho, l }, &mut rng).unwrap();
            let changed = (x.neg_mask() ^ y.neg_mask()).count_ones() as usize;
            prop_assert!(changed <= l);
        }

        #[test]
        fn resample_keeps_other_coords(n in 1usize..16, mask in any::<u32>(), xm in any::<u32>(), seed in any::<u64>()) {
            let full = full_mask(n);
            let x = PointVector::raw(xm & full, n);
            let d = DistributionSpec::product(vec![0.2; n]).unwrap();
            let y = d.resample_coords(x, mask, &mut RandomSource::new(seed));
            prop_assert_eq!(x.neg_mask() & !mask, y.neg_mask() & !mask);
        }
    }
}
