//! Orthonormal parity bases and exact Fourier spectra.
//!
//! Under a product distribution the Gram-Schmidt basis taken in
//! (cardinality, mask) order has the closed form
//! `psi_S(x) = prod_{i in S} (x_i - mu_i) / sigma_i`, which is what
//! [`OrthonormalBasis::closed_form`] evaluates. Empirical distributions get a
//! numerical Gram-Schmidt over their support.

use std::collections::HashMap;

use crate::dist::DistributionSpec;
use crate::error::{AuditError, Result};
use crate::models::ModelOracle;
use crate::point::{canonical_order, full_mask, parity, PointVector, SubsetIndex};

/// Residual norm below which a Gram-Schmidt direction is declared the zero function.
pub const VANISHING_THRESHOLD: f64 = 1e-10;

/// Largest dimension for which bases are built by enumeration.
pub const MAX_ENUM_DIM: usize = 14;

/// Largest dimension for exact spectra.
pub const MAX_SPECTRUM_DIM: usize = 12;

#[derive(Clone, Debug)]
struct Tabulated {
    support: Vec<PointVector>,
    weights: Vec<f64>,
    index: HashMap<PointVector, usize>,
    /// `values[mask]` holds psi_S on the support; empty when psi_S vanishes.
    values: Vec<Vec<f64>>,
    /// `expansion[mask]` holds the dense coefficients over chi_T; empty when psi_S vanishes.
    expansion: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
enum Kind {
    Parity,
    Product { means: Vec<f64>, inv_sd: Vec<f64>, degenerate: u32 },
    Tabulated(Box<Tabulated>),
}

/// Conditioning summary of a numerical Gram-Schmidt run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisDiagnostics {
    /// Smallest residual norm among the directions that were kept.
    pub min_residual: f64,
    pub vanished: usize,
    pub kept: usize,
}

#[derive(Clone, Debug)]
pub struct OrthonormalBasis {
    n: usize,
    dist: DistributionSpec,
    kind: Kind,
    diagnostics: BasisDiagnostics,
}

impl OrthonormalBasis {
    /// Closed-form basis for Uniform or Product distributions. No enumeration, any `n <= 30`.
    pub fn closed_form(dist: &DistributionSpec) -> Result<Self> {
        dist.validate()?;
        let n = dist.dim();
        let kind = match dist {
            DistributionSpec::Uniform(_) => Kind::Parity,
            DistributionSpec::Product(b) => {
                let mut degenerate = 0u32;
                let inv_sd = b
                    .iter()
                    .enumerate()
                    .map(|(i, &mu)| {
                        let var = 1.0 - mu * mu;
                        if var <= 0.0 {
                            degenerate |= 1 << i;
                            0.0
                        } else {
                            1.0 / var.sqrt()
                        }
                    })
                    .collect();
                Kind::Product { means: b.clone(), inv_sd, degenerate }
            }
            DistributionSpec::Empirical(_) => {
                return Err(AuditError::UnsupportedDistribution(
                    "closed-form basis needs independent coordinates".into(),
                ))
            }
        };
        let vanished = match &kind {
            Kind::Product { degenerate, .. } => {
                (1usize << n) - (1usize << (n - degenerate.count_ones() as usize))
            }
            _ => 0,
        };
        let kept = (1usize << n) - vanished;
        Ok(Self { n, dist: dist.clone(), kind, diagnostics: BasisDiagnostics { min_residual: 1.0, vanished, kept } })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn dist(&self) -> &DistributionSpec {
        &self.dist
    }

    pub fn diagnostics(&self) -> BasisDiagnostics {
        self.diagnostics
    }

    pub fn is_parity(&self) -> bool {
        matches!(self.kind, Kind::Parity)
    }

    pub fn has_closed_form(&self) -> bool {
        !matches!(self.kind, Kind::Tabulated(_))
    }

    pub fn is_vanishing(&self, s: SubsetIndex) -> bool {
        match &self.kind {
            Kind::Parity => false,
            Kind::Product { degenerate, .. } => s.mask() & degenerate != 0,
            Kind::Tabulated(t) => t.values[s.mask() as usize].is_empty(),
        }
    }

    /// `psi_S(x)`. Off-support points of an empirical basis are evaluated through
    /// the parity expansion.
    pub fn eval(&self, s: SubsetIndex, x: PointVector) -> f64 {
        match &self.kind {
            Kind::Parity => parity(s, x),
            Kind::Product { means, inv_sd, degenerate } => {
                if s.mask() & degenerate != 0 {
                    return 0.0;
                }
                s.coords().map(|i| (x.get(i) as f64 - means[i]) * inv_sd[i]).product()
            }
            Kind::Tabulated(t) => {
                let m = s.mask() as usize;
                if t.values[m].is_empty() {
                    return 0.0;
                }
                match t.index.get(&x) {
                    Some(&k) => t.values[m][k],
                    None => t.expansion[m]
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| **c != 0.0)
                        .map(|(tm, c)| c * parity(SubsetIndex(tm as u32), x))
                        .sum(),
                }
            }
        }
    }

    /// Expansion of `psi_S` over the raw parities, as `(T, coefficient)` pairs with
    /// nonzero coefficients, ordered by mask.
    pub fn expansion(&self, s: SubsetIndex) -> Vec<(SubsetIndex, f64)> {
        match &self.kind {
            Kind::Parity => vec![(s, 1.0)],
            Kind::Product { means, inv_sd, degenerate } => {
                if s.mask() & degenerate != 0 {
                    return Vec::new();
                }
                // Sub-masks T of S: coefficient prod_{i in T} inv_sd_i * prod_{i in S\T} (-mu_i inv_sd_i).
                let mut out = Vec::new();
                let mut t = s.mask();
                loop {
                    let c: f64 = s
                        .coords()
                        .map(|i| if t >> i & 1 == 1 { inv_sd[i] } else { -means[i] * inv_sd[i] })
                        .product();
                    if c != 0.0 {
                        out.push((SubsetIndex(t), c));
                    }
                    if t == 0 {
                        break;
                    }
                    t = (t - 1) & s.mask();
                }
                out.sort_by_key(|(t, _)| t.mask());
                out
            }
            Kind::Tabulated(tab) => tab.expansion[s.mask() as usize]
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(m, c)| (SubsetIndex(m as u32), *c))
                .collect(),
        }
    }

    /// `<psi_S, psi_T>_D` by enumeration over the support.
    pub fn inner_product(&self, s: SubsetIndex, t: SubsetIndex) -> Result<f64> {
        let support = self.dist.support(MAX_ENUM_DIM)?;
        Ok(support.iter().map(|&(x, p)| p * self.eval(s, x) * self.eval(t, x)).sum())
    }

    /// Subsets in the canonical (cardinality, mask) order.
    pub fn order(&self) -> Vec<SubsetIndex> {
        canonical_order(self.n)
    }
}

/// The orthonormal basis of `dist`: exact parities for Uniform, the closed form for
/// Product, numerical Gram-Schmidt for Empirical.
pub fn gram_schmidt_basis(dist: &DistributionSpec, n: usize) -> Result<OrthonormalBasis> {
    if dist.dim() != n {
        return Err(AuditError::InvalidParameter(format!(
            "distribution has dimension {}, requested basis of dimension {n}",
            dist.dim()
        )));
    }
    match dist {
        DistributionSpec::Empirical(_) => gram_schmidt_numeric(dist),
        _ => OrthonormalBasis::closed_form(dist),
    }
}

/// Modified Gram-Schmidt over the support of any distribution, in canonical order,
/// with one re-orthogonalization pass.
pub fn gram_schmidt_numeric(dist: &DistributionSpec) -> Result<OrthonormalBasis> {
    dist.validate()?;
    let n = dist.dim();
    if n > MAX_ENUM_DIM {
        return Err(AuditError::TooLarge { n, cap: MAX_ENUM_DIM });
    }
    let support_w = dist.support(MAX_ENUM_DIM)?;
    if support_w.is_empty() {
        return Err(AuditError::InvalidDistribution("empty support".into()));
    }
    let support: Vec<PointVector> = support_w.iter().map(|(x, _)| *x).collect();
    let weights: Vec<f64> = support_w.iter().map(|(_, p)| *p).collect();
    let size = 1usize << n;

    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(&weights).map(|((x, y), w)| w * x * y).sum() };

    let mut values: Vec<Vec<f64>> = vec![Vec::new(); size];
    let mut expansion: Vec<Vec<f64>> = vec![Vec::new(); size];
    let mut kept: Vec<usize> = Vec::new();
    let mut min_residual = f64::INFINITY;
    let mut vanished = 0usize;

    for s in canonical_order(n) {
        let m = s.mask() as usize;
        let mut v: Vec<f64> = support.iter().map(|&x| parity(s, x)).collect();
        let mut c = vec![0.0; size];
        c[m] = 1.0;
        for _pass in 0..2 {
            for &k in &kept {
                let proj = dot(&v, &values[k]);
                if proj != 0.0 {
                    for (vi, qi) in v.iter_mut().zip(&values[k]) {
                        *vi -= proj * qi;
                    }
                    for (ci, ek) in c.iter_mut().zip(&expansion[k]) {
                        *ci -= proj * ek;
                    }
                }
            }
        }
        let norm = dot(&v, &v).max(0.0).sqrt();
        if norm < VANISHING_THRESHOLD {
            vanished += 1;
            continue;
        }
        min_residual = min_residual.min(norm);
        v.iter_mut().for_each(|x| *x /= norm);
        c.iter_mut().for_each(|x| *x /= norm);
        values[m] = v;
        expansion[m] = c;
        kept.push(m);
    }

    let index = support.iter().enumerate().map(|(k, x)| (*x, k)).collect();
    let diagnostics = BasisDiagnostics { min_residual, vanished, kept: kept.len() };
    Ok(OrthonormalBasis {
        n,
        dist: dist.clone(),
        kind: Kind::Tabulated(Box::new(Tabulated { support, weights, index, values, expansion })),
        diagnostics,
    })
}

/// Exact coefficients `hat h(S)`, dense by mask.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactSpectrum {
    n: usize,
    coeffs: Vec<f64>,
}

impl ExactSpectrum {
    pub fn from_coefficients(n: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != 1usize << n {
            return Err(AuditError::InvalidParameter(format!(
                "expected {} coefficients, got {}",
                1usize << n,
                coeffs.len()
            )));
        }
        Ok(Self { n, coeffs })
    }

    /// Spectrum of an arbitrary real function on the support of the basis distribution.
    pub fn from_fn(basis: &OrthonormalBasis, mut f: impl FnMut(PointVector) -> f64) -> Result<Self> {
        let n = basis.dim();
        if n > MAX_SPECTRUM_DIM && basis.has_closed_form() {
            return Err(AuditError::TooLarge { n, cap: MAX_SPECTRUM_DIM });
        }
        match &basis.kind {
            Kind::Tabulated(t) => {
                let fx: Vec<f64> = t.support.iter().map(|&x| f(x)).collect();
                Ok(Self::from_tabulated(n, t, &fx))
            }
            _ => {
                let dist = basis.dist();
                let fx: Vec<f64> = PointVector::enumerate(n)?
                    .map(|x| {
                        let p = dist.prob(x);
                        if p > 0.0 {
                            p * f(x)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                Ok(Self::from_weighted_table(basis, fx))
            }
        }
    }

    fn from_tabulated(n: usize, t: &Tabulated, fx: &[f64]) -> Self {
        let coeffs = t
            .values
            .iter()
            .map(|v| {
                if v.is_empty() {
                    0.0
                } else {
                    v.iter().zip(fx).zip(&t.weights).map(|((psi, h), w)| w * psi * h).sum()
                }
            })
            .collect();
        Self { n, coeffs }
    }

    /// Butterfly transform of `D(x) f(x)` laid out by mask.
    fn from_weighted_table(basis: &OrthonormalBasis, mut a: Vec<f64>) -> Self {
        let n = basis.dim();
        for i in 0..n {
            let (plus, minus) = match &basis.kind {
                Kind::Parity => (1.0, -1.0),
                Kind::Product { means, inv_sd, .. } => ((1.0 - means[i]) * inv_sd[i], (-1.0 - means[i]) * inv_sd[i]),
                Kind::Tabulated(_) => unreachable!(),
            };
            let bit = 1usize << i;
            for m in 0..a.len() {
                if m & bit == 0 {
                    let (u, v) = (a[m], a[m | bit]);
                    a[m] = u + v;
                    a[m | bit] = plus * u + minus * v;
                }
            }
        }
        Self { n, coeffs: a }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, s: SubsetIndex) -> f64 {
        self.coeffs[s.mask() as usize]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn iter(&self) -> impl Iterator<Item = (SubsetIndex, f64)> + '_ {
        self.coeffs.iter().enumerate().map(|(m, c)| (SubsetIndex(m as u32), *c))
    }

    /// `sum_S hat h(S)^2`.
    pub fn parseval(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// `sum_{S containing a} hat h(S)^2` (0-based `a`).
    pub fn weight_containing(&self, a: usize) -> f64 {
        self.iter().filter(|(s, _)| s.contains(a)).map(|(_, c)| c * c).sum()
    }

    /// Exact weight of bucket `B^{prefix, k}`: subsets agreeing with `prefix` on the first `k` coordinates.
    pub fn bucket_weight(&self, prefix: SubsetIndex, k: usize) -> f64 {
        let pm = full_mask(k);
        self.iter().filter(|(s, _)| s.mask() & pm == prefix.mask() & pm).map(|(_, c)| c * c).sum()
    }

    /// `sum_S hat h(S) psi_S(x)`.
    pub fn reconstruct(&self, basis: &OrthonormalBasis, x: PointVector) -> f64 {
        self.iter().filter(|(_, c)| *c != 0.0).map(|(s, c)| c * basis.eval(s, x)).sum()
    }
}

/// Exact spectrum of a model by full enumeration of the support.
pub fn exact_fourier_spectrum(model: &ModelOracle, basis: &OrthonormalBasis) -> Result<ExactSpectrum> {
    let n = basis.dim();
    if model.dim() != n {
        return Err(AuditError::InvalidParameter(format!(
            "model has dimension {}, basis has {n}",
            model.dim()
        )));
    }
    let points: Vec<PointVector> = match &basis.kind {
        Kind::Tabulated(t) => t.support.clone(),
        _ => {
            if n > MAX_SPECTRUM_DIM {
                return Err(AuditError::TooLarge { n, cap: MAX_SPECTRUM_DIM });
            }
            let dist = basis.dist();
            PointVector::enumerate(n)?.filter(|x| dist.prob(*x) > 0.0).collect()
        }
    };
    let labels = model.label_all(&points)?;
    let table: HashMap<PointVector, f64> = points.into_iter().zip(labels.into_iter().map(|y| y as f64)).collect();
    ExactSpectrum::from_fn(basis, |x| table.get(&x).copied().unwrap_or(0.0))
}
