//! The black-box oracle, query budgets, and the model backends.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::OracleError;
use crate::point::PointVector;

pub mod external;
pub mod protocol;
pub mod spec;
pub mod zoo;

pub use external::{connect, Endpoint};
pub use spec::{build_model, ModelSpec};
pub use zoo::{DecisionStumpTree, Junta, LinearThreshold, LookupTable, TreeNode};

/// Something that labels points. Implementations must be deterministic.
pub trait Backend: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// 2 for binary (labels exactly -1/+1), K >= 3 for multiclass (labels 0..K).
    fn arity(&self) -> usize;

    fn classify(&self, xs: &[PointVector]) -> Result<Vec<i32>, OracleError>;
}

/// Query budget shared by every batch of an audit run.
#[derive(Debug)]
pub struct AuditBudget {
    max: u64,
    consumed: AtomicU64,
}

impl AuditBudget {
    pub fn new(max_queries: u64) -> Self {
        Self { max: max_queries, consumed: AtomicU64::new(0) }
    }

    pub fn unlimited() -> Self {
        Self::new(u64::MAX)
    }

    pub fn max(&self) -> u64 {
        self.max
    }

    pub fn consumed(&self) -> u64 {
        self.consumed.load(Ordering::SeqCst)
    }

    pub fn remaining(&self) -> u64 {
        self.max - self.consumed()
    }

    /// Reserve `k` queries, all or nothing.
    pub fn try_charge(&self, k: u64) -> Result<(), OracleError> {
        let mut cur = self.consumed.load(Ordering::SeqCst);
        loop {
            let remaining = self.max - cur;
            if k > remaining {
                return Err(OracleError::BudgetExceeded { requested: k, remaining });
            }
            match self.consumed.compare_exchange(cur, cur + k, Ordering::SeqCst, Ordering::SeqCst) {
                Ok(_) => return Ok(()),
                Err(actual) => cur = actual,
            }
        }
    }

    fn refund(&self, k: u64) {
        self.consumed.fetch_sub(k, Ordering::SeqCst);
    }
}

/// A labeled black box with a monotone query counter.
#[derive(Clone)]
pub struct ModelOracle {
    backend: Arc<dyn Backend>,
    queries: Arc<AtomicU64>,
    name: String,
}

impl fmt::Debug for ModelOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelOracle")
            .field("name", &self.name)
            .field("n", &self.dim())
            .field("arity", &self.arity())
            .field("queries", &self.queries())
            .finish()
    }
}

impl ModelOracle {
    pub fn new(backend: impl Backend + 'static, name: impl Into<String>) -> Self {
        Self { backend: Arc::new(backend), queries: Arc::new(AtomicU64::new(0)), name: name.into() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.backend.dim()
    }

    pub fn arity(&self) -> usize {
        self.backend.arity()
    }

    pub fn is_binary(&self) -> bool {
        self.arity() == 2
    }

    /// Total points labeled so far.
    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::SeqCst)
    }

    /// Label a batch, charging the budget up front. On failure only the labels the
    /// backend acknowledged stay charged and counted.
    pub fn query_batch(&self, xs: &[PointVector], budget: &AuditBudget) -> Result<Vec<i32>, OracleError> {
        self.check_dims(xs)?;
        let k = xs.len() as u64;
        budget.try_charge(k)?;
        match self.run(xs) {
            Ok(ys) => Ok(ys),
            Err(e) => {
                budget.refund(k - e.acknowledged().min(k));
                Err(e)
            }
        }
    }

    /// Label a batch outside any audit budget (exact enumeration, ground truth).
    pub fn label_all(&self, xs: &[PointVector]) -> Result<Vec<i32>, OracleError> {
        self.check_dims(xs)?;
        self.run(xs)
    }

    pub fn label(&self, x: PointVector) -> Result<i32, OracleError> {
        Ok(self.label_all(&[x])?[0])
    }

    fn check_dims(&self, xs: &[PointVector]) -> Result<(), OracleError> {
        let n = self.dim();
        match xs.iter().find(|x| x.dim() != n) {
            Some(x) => Err(OracleError::DimensionMismatch { expected: n, got: x.dim() }),
            None => Ok(()),
        }
    }

    fn run(&self, xs: &[PointVector]) -> Result<Vec<i32>, OracleError> {
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        match self.backend.classify(xs) {
            Ok(ys) => {
                self.queries.fetch_add(ys.len() as u64, Ordering::SeqCst);
                if ys.len() != xs.len() {
                    return Err(OracleError::Protocol {
                        message: format!("{} labels for {} points", ys.len(), xs.len()),
                        acknowledged: ys.len() as u64,
                    });
                }
                let arity = self.arity();
                let bad = if arity == 2 {
                    ys.iter().find(|&&y| y != 1 && y != -1)
                } else {
                    ys.iter().find(|&&y| y < 0 || y as usize >= arity)
                };
                if let Some(y) = bad {
                    return Err(OracleError::Protocol {
                        message: format!("label {y} outside the declared arity {arity}"),
                        acknowledged: ys.len() as u64,
                    });
                }
                Ok(ys)
            }
            Err(e) => {
                self.queries.fetch_add(e.acknowledged(), Ordering::SeqCst);
                Err(e)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_batch_counts_and_labels() {
        let h = zoo::constant(4, 1).unwrap();
        let budget = AuditBudget::new(10);
        let xs: Vec<PointVector> = (0..5).map(|m| PointVector::from_neg_mask(m, 4).unwrap()).collect();
        assert_eq!(h.query_batch(&xs, &budget).unwrap(), vec![1; 5]);
        assert_eq!(h.queries(), 5);
        assert_eq!(budget.consumed(), 5);
    }

    #[test]
    fn over_budget_batch_returns_nothing() {
        let h = zoo::constant(3, 1).unwrap();
        let budget = AuditBudget::new(4);
        let xs = vec![PointVector::ones(3).unwrap(); 5];
        let err = h.query_batch(&xs, &budget).unwrap_err();
        assert_eq!(err, OracleError::BudgetExceeded { requested: 5, remaining: 4 });
        assert_eq!(err.shortfall(), Some(1));
        assert_eq!(h.queries(), 0);
        assert_eq!(budget.consumed(), 0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let h = zoo::constant(3, 1).unwrap();
        let err = h.label(PointVector::ones(2).unwrap()).unwrap_err();
        assert!(matches!(err, OracleError::DimensionMismatch { expected: 3, got: 2 }));
    }

    #[test]
    fn budget_is_shared_across_threads() {
        let budget = AuditBudget::new(1000);
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    for _ in 0..200 {
                        let _ = budget.try_charge(1);
                    }
                });
            }
        });
        assert_eq!(budget.consumed(), 1000);
    }
}
