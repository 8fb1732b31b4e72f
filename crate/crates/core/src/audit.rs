//! One entry point for a single audit run under any method.

use crate::baselines::{uniform_estimate, BaselineSpec};
use crate::dist::DistributionSpec;
use crate::error::{AuditError, Result};
use crate::estimators::{
    afa_spectral_audit, estimate_multiclass_sp, estimate_statistical_parity, AfaConfig, AuditReport, Method, PropertySpec,
};
use crate::exact::exact_property;
use crate::models::{AuditBudget, ModelOracle};
use crate::rng::RandomSource;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditRequest {
    pub property: PropertySpec,
    pub method: Method,
    /// Defaults per property when absent.
    pub tau: Option<f64>,
    pub delta: f64,
    /// Query budget for AFA and Uniform; ignored by Exact.
    pub budget: u64,
}

impl AuditRequest {
    pub fn new(property: PropertySpec, method: Method, budget: u64) -> Self {
        Self { property, method, tau: None, delta: 0.05, budget }
    }

    pub fn afa_config(&self) -> AfaConfig {
        let mut c = AfaConfig::for_property(&self.property);
        if let Some(t) = self.tau {
            c.tau = t;
        }
        c.delta = self.delta;
        c
    }
}

pub fn run_audit(model: &ModelOracle, dist: &DistributionSpec, req: &AuditRequest, rng: &mut RandomSource) -> Result<AuditReport> {
    if model.dim() != dist.dim() {
        return Err(AuditError::InvalidParameter(format!(
            "model has dimension {}, distribution has {}",
            model.dim(),
            dist.dim()
        )));
    }
    let budget = AuditBudget::new(req.budget);
    match req.method {
        Method::Exact => {
            let e = exact_property(model, dist, &req.property)?;
            let mut r = AuditReport::new(req.property, Method::Exact, e.correlation.unwrap_or(e.value));
            r.correlation = e.correlation;
            r.flip_probability = e.correlation.map(|_| e.value);
            r.diag("enumeration_size", e.enumeration_size as f64);
            Ok(r)
        }
        Method::Uniform => uniform_estimate(model, dist, &BaselineSpec::for_budget(req.property, req.budget)?, rng, &budget),
        Method::Afa => {
            let cfg = req.afa_config();
            match req.property {
                PropertySpec::Robustness { .. } | PropertySpec::IndividualFairness { .. } => {
                    afa_spectral_audit(model, dist, &req.property, &cfg, &budget, rng)
                }
                PropertySpec::StatisticalParity { sensitive } => estimate_statistical_parity(model, dist, sensitive, &cfg, &budget, rng),
                PropertySpec::Multicalibration { sensitive } => estimate_multiclass_sp(model, dist, sensitive, &cfg, &budget, rng),
            }
        }
    }
}
