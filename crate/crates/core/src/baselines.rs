//! i.i.d. sampling estimators used as the comparison point for the spectral auditor.

use crate::dist::{perturb, DistributionSpec};
use crate::error::{AuditError, Result};
use crate::estimators::{AuditReport, Method, PropertySpec};
use crate::models::{AuditBudget, ModelOracle};
use crate::point::PointVector;
use crate::rng::RandomSource;

/// Draws per group before the SP baseline gives up, as a multiple of `m`.
pub const RETRY_FACTOR: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaselineSpec {
    pub property: PropertySpec,
    /// Rob/IF: number of `(x, perturb(x))` pairs. SP/MC: total labeled points.
    pub m: usize,
}

impl BaselineSpec {
    pub fn new(property: PropertySpec, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(AuditError::InvalidParameter("baseline needs m >= 1".into()));
        }
        Ok(Self { property, m })
    }

    /// Largest sample count that fits in `queries`.
    pub fn for_budget(property: PropertySpec, queries: u64) -> Result<Self> {
        let m = if property.is_spectral() { queries / 2 } else { queries };
        Self::new(property, m as usize)
    }
}

fn hoeffding_halfwidth(m: usize, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * m as f64)).sqrt()
}

pub fn uniform_estimate(
    model: &ModelOracle,
    dist: &DistributionSpec,
    spec: &BaselineSpec,
    rng: &mut RandomSource,
    budget: &AuditBudget,
) -> Result<AuditReport> {
    let n = dist.dim();
    spec.property.validate(n)?;
    if spec.m == 0 {
        return Err(AuditError::InvalidParameter("baseline needs m >= 1".into()));
    }
    let start = budget.consumed();
    let mut r = match spec.property {
        PropertySpec::Robustness { .. } | PropertySpec::IndividualFairness { .. } => {
            if !model.is_binary() {
                return Err(AuditError::UnsupportedProperty(format!("{} needs a binary model", spec.property)));
            }
            let pert = spec.property.perturbation().expect("spectral property");
            let xs = dist.sample_many(spec.m, rng);
            let mut prng = rng.derive(0x5042);
            let ys = xs.iter().map(|x| perturb(*x, &pert, &mut prng)).collect::<Result<Vec<_>>>()?;
            let mut pts = xs;
            pts.extend(ys);
            let labels = model.query_batch(&pts, budget)?;
            let (hx, hy) = labels.split_at(spec.m);
            let freq = hx.iter().zip(hy).filter(|(a, b)| a != b).count() as f64 / spec.m as f64;
            let mut r = AuditReport::new(spec.property, Method::Uniform, 1.0 - 2.0 * freq);
            r.correlation = Some(1.0 - 2.0 * freq);
            r.flip_probability = Some(freq);
            r
        }
        PropertySpec::StatisticalParity { sensitive } => {
            if !model.is_binary() {
                return Err(AuditError::UnsupportedProperty("statistical parity needs a binary model; use mc".into()));
            }
            let per_group = (spec.m / 2).max(1);
            let mut groups = [Vec::with_capacity(per_group), Vec::with_capacity(per_group)];
            for (g, sign) in [(0usize, 1i8), (1, -1)] {
                let cap = RETRY_FACTOR * spec.m;
                let mut draws = 0;
                while groups[g].len() < per_group {
                    if draws == cap {
                        return Err(AuditError::StarvedGroup { group: sign, attempts: draws });
                    }
                    draws += 1;
                    let x = dist.sample(rng);
                    if x.get(sensitive) == sign {
                        groups[g].push(x);
                    }
                }
            }
            let rate = |xs: &[PointVector]| -> Result<f64> {
                let ys = model.query_batch(xs, budget)?;
                // Labels recoded to {0, 1}.
                Ok(ys.iter().map(|&y| ((y + 1) / 2) as f64).sum::<f64>() / xs.len() as f64)
            };
            let gap = rate(&groups[0])? - rate(&groups[1])?;
            let mut r = AuditReport::new(spec.property, Method::Uniform, gap.abs());
            r.diag("signed_gap", gap);
            r.diag("group_size", per_group as f64);
            r
        }
        PropertySpec::Multicalibration { sensitive } => {
            let xs = dist.sample_many(spec.m, rng);
            let ys = model.query_batch(&xs, budget)?;
            let k = model.arity();
            let mut mass = vec![[0.0f64; 2]; k];
            for (x, y) in xs.iter().zip(&ys) {
                mass[*y as usize][(x.get(sensitive) < 0) as usize] += 1.0;
            }
            let best = (0..k)
                .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
                .filter_map(|(i, j)| {
                    let (np, nm) = (mass[i][0] + mass[j][0], mass[i][1] + mass[j][1]);
                    (np > 0.0 && nm > 0.0).then(|| (mass[i][0] / np - mass[i][1] / nm).abs())
                })
                .reduce(f64::max)
                .ok_or(AuditError::NoValidPair)?;
            AuditReport::new(spec.property, Method::Uniform, best)
        }
    };
    r.queries = budget.consumed() - start;
    r.delta = Some(0.05);
    r.epsilon = Some(hoeffding_halfwidth(spec.m, 0.05));
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::zoo;

    #[test]
    fn constant_never_flips() {
        let d = DistributionSpec::uniform(5).unwrap();
        let h = zoo::constant(5, 1).unwrap();
        for p in [PropertySpec::Robustness { rho: 0.1 }, PropertySpec::IndividualFairness { rho: -0.3, l: 2 }] {
            let r = uniform_estimate(&h, &d, &BaselineSpec::new(p, 500).unwrap(), &mut RandomSource::new(0), &AuditBudget::unlimited())
                .unwrap();
            assert_eq!(r.flip_probability, Some(0.0));
            assert_eq!(r.queries, 1000);
        }
    }

    #[test]
    fn dictator_parity_gap() {
        let d = DistributionSpec::uniform(5).unwrap();
        let h = zoo::dictator(5, 2).unwrap();
        let spec = BaselineSpec::new(PropertySpec::StatisticalParity { sensitive: 2 }, 10_000).unwrap();
        let r = uniform_estimate(&h, &d, &spec, &mut RandomSource::new(1), &AuditBudget::unlimited()).unwrap();
        assert_eq!(r.estimate, 1.0);
        assert_eq!(r.queries, 10_000);
    }

    #[test]
    fn dictator_flip_probability() {
        let d = DistributionSpec::uniform(4).unwrap();
        let h = zoo::dictator(4, 0).unwrap();
        let spec = BaselineSpec::new(PropertySpec::Robustness { rho: 0.5 }, 100_000).unwrap();
        let r = uniform_estimate(&h, &d, &spec, &mut RandomSource::new(2), &AuditBudget::unlimited()).unwrap();
        assert!((r.flip_probability.unwrap() - 0.25).abs() < 0.01);
    }

    #[test]
    fn starved_group_is_named() {
        let d = DistributionSpec::product(vec![0.0, -1.0]).unwrap();
        let h = zoo::dictator(2, 0).unwrap();
        let spec = BaselineSpec::new(PropertySpec::StatisticalParity { sensitive: 1 }, 10).unwrap();
        let r = uniform_estimate(&h, &d, &spec, &mut RandomSource::new(0), &AuditBudget::unlimited());
        assert!(matches!(r, Err(AuditError::StarvedGroup { group: 1, attempts: 1000 })));
    }

    #[test]
    fn budget_is_all_or_nothing() {
        let d = DistributionSpec::uniform(4).unwrap();
        let h = zoo::dictator(4, 0).unwrap();
        let spec = BaselineSpec::new(PropertySpec::Robustness { rho: 0.5 }, 100).unwrap();
        let b = AuditBudget::new(150);
        assert!(uniform_estimate(&h, &d, &spec, &mut RandomSource::new(0), &b).is_err());
        assert_eq!(b.consumed(), 0);
    }

    #[test]
    fn for_budget_matches_query_count() {
        let p = PropertySpec::Robustness { rho: 0.5 };
        assert_eq!(BaselineSpec::for_budget(p, 2001).unwrap().m, 1000);
        let p = PropertySpec::StatisticalParity { sensitive: 0 };
        assert_eq!(BaselineSpec::for_budget(p, 2001).unwrap().m, 2001);
    }
}
