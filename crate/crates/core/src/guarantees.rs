//! Sample-size calculators, the reconstruction gap bound, and the
//! manipulation-proof subclass around a reference spectrum.

use std::collections::HashSet;

use rand::RngCore;

use crate::basis::ExactSpectrum;
use crate::error::{AuditError, Result};
use crate::estimators::GfQuadratic;
use crate::point::SubsetIndex;
use crate::rng::RandomSource;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleSizeKind {
    /// Robustness / individual fairness.
    Spectral,
    /// Group fairness (statistical parity).
    GroupFairness,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleSizeQuery {
    pub kind: SampleSizeKind,
    pub epsilon: f64,
    pub delta: f64,
    /// `char(L)`; ignored for group fairness.
    pub char_listed: f64,
    /// `char(complement of L)`; ignored for group fairness.
    pub char_rest: f64,
}

impl SampleSizeQuery {
    pub fn spectral(epsilon: f64, delta: f64, char_listed: f64, char_rest: f64) -> Self {
        Self { kind: SampleSizeKind::Spectral, epsilon, delta, char_listed, char_rest }
    }

    pub fn group_fairness(epsilon: f64, delta: f64) -> Self {
        Self { kind: SampleSizeKind::GroupFairness, epsilon, delta, char_listed: 0.0, char_rest: 0.0 }
    }
}

/// Spectral: `ceil(8 sqrt(2) char(L) (1 - 4 char(rest)) / eps * sqrt(ln(2/delta)))`, at least 1.
/// Group fairness: `ceil(ln(4/delta) / eps^2)` (leading constant fixed to 1).
pub fn sample_size(q: &SampleSizeQuery) -> Result<u64> {
    if !(q.epsilon > 0.0 && q.epsilon < 1.0) {
        return Err(AuditError::InvalidParameter(format!("epsilon = {} outside (0, 1)", q.epsilon)));
    }
    if !(q.delta > 0.0 && q.delta <= 1.0) {
        return Err(AuditError::InvalidParameter(format!("delta = {} outside (0, 1]", q.delta)));
    }
    let m = match q.kind {
        SampleSizeKind::Spectral => {
            if !(q.char_listed >= 0.0 && q.char_rest >= 0.0) {
                return Err(AuditError::InvalidParameter("characteristic sums must be non-negative".into()));
            }
            8.0 * 2f64.sqrt() * q.char_listed * (1.0 - 4.0 * q.char_rest) / q.epsilon * (2.0 / q.delta).ln().sqrt()
        }
        SampleSizeKind::GroupFairness => (4.0 / q.delta).ln() / (q.epsilon * q.epsilon),
    };
    Ok((m.ceil() as u64).max(1))
}

/// Upper bound on `|SP(h') - SP(h)|` when `h'` and `h` disagree with probability
/// `disagreement` and the `+1` group has mass `alpha`.
pub fn reconstruction_gap_bound(disagreement: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(AuditError::DegenerateGroup(format!("alpha = {alpha}")));
    }
    if !(0.0..=1.0).contains(&disagreement) {
        return Err(AuditError::InvalidParameter(format!("disagreement {disagreement} outside [0, 1]")));
    }
    Ok((disagreement / alpha.min(1.0 - alpha)).min(1.0))
}

/// A coefficient table agreeing with the reference on `S = {}` and every `S` containing `A`.
/// Not a `+-1` model in general.
#[derive(Clone, Debug, PartialEq)]
pub struct MpSubclassMember {
    pub spectrum: ExactSpectrum,
    /// Free subsets whose coefficient was negated.
    pub flipped: Vec<SubsetIndex>,
}

impl MpSubclassMember {
    /// `(p, Inf_A)` read off the coefficients: `p = (1 + c(empty)) / 2`, `Inf_A = sum_{S containing A} c(S)^2`.
    pub fn gf_inputs(&self, a: usize) -> (f64, f64) {
        ((1.0 + self.spectrum.get(SubsetIndex::EMPTY)) / 2.0, self.spectrum.weight_containing(a))
    }

    pub fn gf_quadratic(&self, a: usize, alpha: f64) -> Result<GfQuadratic> {
        let (p, inf) = self.gf_inputs(a);
        GfQuadratic::new(alpha, p.clamp(0.0, 1.0), inf.clamp(0.0, 1.0))
    }
}

/// Subsets that the subclass may change: non-empty and not containing `A`.
pub fn free_subsets(n: usize, a: usize) -> Vec<SubsetIndex> {
    (1u32..(1u32 << n)).map(SubsetIndex).filter(|s| !s.contains(a)).collect()
}

/// `count` distinct members, the first being the reference itself.
pub fn mp_subclass(reference: &ExactSpectrum, a: usize, count: usize, rng: &mut RandomSource) -> Result<Vec<MpSubclassMember>> {
    let n = reference.dim();
    if a >= n {
        return Err(AuditError::InvalidParameter(format!("sensitive coordinate {} outside 1..={n}", a + 1)));
    }
    let free = free_subsets(n, a);
    let available = 1u128.checked_shl(free.len() as u32).unwrap_or(u128::MAX);
    if count as u128 > available {
        return Err(AuditError::CountTooLarge { requested: count as u128, available });
    }
    let words = free.len().div_ceil(64);
    let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    let mut pattern = vec![0u64; words];
    while out.len() < count {
        if !seen.contains(&pattern) {
            let mut coeffs = reference.coefficients().to_vec();
            let mut flipped = Vec::new();
            for (k, s) in free.iter().enumerate() {
                if pattern[k / 64] >> (k % 64) & 1 == 1 {
                    coeffs[s.mask() as usize] = -coeffs[s.mask() as usize];
                    flipped.push(*s);
                }
            }
            out.push(MpSubclassMember { spectrum: ExactSpectrum::from_coefficients(n, coeffs)?, flipped });
            seen.insert(pattern.clone());
        }
        for (k, w) in pattern.iter_mut().enumerate() {
            let bits = (free.len() - 64 * k).min(64);
            *w = if bits == 64 { rng.next_u64() } else { rng.next_u64() & ((1u64 << bits) - 1) };
        }
    }
    Ok(out)
}
