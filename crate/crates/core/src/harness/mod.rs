//! Experiment plumbing: distribution parsing, dataset ingestion and sweeps.

mod dataset;
mod sweep;

pub use dataset::{ingest_csv, ingest_reader, ColumnRule, CsvSchema, Dataset, DatasetTable};
pub use sweep::{parse_property, run_sweep, ModelSource, SweepArtifact, SweepConfig, SweepRow, CSV_HEADER};

use rand::seq::index;

use crate::dist::{DistributionSpec, Empirical};
use crate::error::{AuditError, Result};
use crate::point::{check_dim, PointVector};
use crate::rng::RandomSource;

/// `uniform` or `product:b1,b2,...` (biases are `E[x_i]`).
pub fn parse_dist(text: &str, n: usize) -> Result<DistributionSpec> {
    let text = text.trim();
    if text == "uniform" {
        return DistributionSpec::uniform(n);
    }
    if let Some(list) = text.strip_prefix("product:") {
        let biases = list
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| AuditError::InvalidDistribution(format!("bias '{t}' is not a number"))))
            .collect::<Result<Vec<_>>>()?;
        if biases.len() != n {
            return Err(AuditError::InvalidDistribution(format!("{} biases for a {n}-dimensional model", biases.len())));
        }
        return DistributionSpec::product(biases);
    }
    Err(AuditError::InvalidDistribution(format!("unknown distribution '{text}' (uniform | product:b1,...)")))
}

/// Random empirical distribution on `atoms` distinct points (capped at `2^n`).
pub fn random_empirical(n: usize, atoms: usize, rng: &mut RandomSource) -> Result<DistributionSpec> {
    check_dim(n)?;
    let total = 1usize.checked_shl(n as u32).unwrap_or(usize::MAX);
    let k = atoms.clamp(1, total);
    let pts: Vec<PointVector> = if n <= 20 {
        index::sample(rng, total, k).into_iter().map(|m| PointVector::from_neg_mask(m as u32, n)).collect::<Result<_>>()?
    } else {
        let mut seen = std::collections::HashSet::new();
        while seen.len() < k {
            seen.insert(DistributionSpec::Uniform(n).sample(rng));
        }
        let mut v: Vec<PointVector> = seen.into_iter().collect();
        v.sort_by_key(|p| p.neg_mask());
        v
    };
    let counts: Vec<f64> = (0..k).map(|_| 0.1 + rng.unit()).collect();
    Ok(DistributionSpec::Empirical(Empirical::from_counts(pts, &counts)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dist_strings() {
        assert_eq!(parse_dist("uniform", 3).unwrap(), DistributionSpec::Uniform(3));
        assert_eq!(parse_dist("product:0.5,-0.2", 2).unwrap(), DistributionSpec::Product(vec![0.5, -0.2]));
        assert!(parse_dist("product:0.5", 2).is_err());
        assert!(parse_dist("product:2,0", 2).is_err());
        assert!(parse_dist("gaussian", 2).is_err());
    }

    #[test]
    fn random_empirical_shape() {
        let d = random_empirical(4, 7, &mut RandomSource::new(1)).unwrap();
        match d {
            DistributionSpec::Empirical(e) => {
                assert_eq!(e.atoms().len(), 7);
                assert!((e.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            _ => unreachable!(),
        }
        let d = random_empirical(2, 100, &mut RandomSource::new(1)).unwrap();
        assert_eq!(d.support(2).unwrap().len(), 4);
    }
}
