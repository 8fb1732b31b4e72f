//! Points of the Boolean hypercube and coordinate subsets.
//!
//! Both types are bitmasks. A [`PointVector`] stores the coordinates equal to
//! `-1`; a [`SubsetIndex`] stores the member coordinates. Coordinates are
//! 0-based in the API and printed 1-based.

use std::fmt;

use crate::error::{AuditError, Result};

/// Largest supported input dimension.
pub const MAX_DIM: usize = 30;

pub fn check_dim(n: usize) -> Result<()> {
    if n == 0 || n > MAX_DIM {
        return Err(AuditError::InvalidDimension(n));
    }
    Ok(())
}

#[inline]
pub(crate) fn full_mask(n: usize) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

/// A point `x` in `{-1, +1}^n`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointVector {
    neg: u32,
    n: u8,
}

impl PointVector {
    /// The all-ones point.
    pub fn ones(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(Self { neg: 0, n: n as u8 })
    }

    /// Build from a mask of coordinates equal to `-1`. Bits at or above `n` are rejected.
    pub fn from_neg_mask(neg: u32, n: usize) -> Result<Self> {
        check_dim(n)?;
        if neg & !full_mask(n) != 0 {
            return Err(AuditError::InvalidParameter(format!(
                "mask {neg:#x} has bits outside dimension {n}"
            )));
        }
        Ok(Self { neg, n: n as u8 })
    }

    /// Internal constructor for callers that already validated `n` and masked `neg`.
    #[inline]
    pub(crate) fn raw(neg: u32, n: usize) -> Self {
        debug_assert!(n >= 1 && n <= MAX_DIM && neg & !full_mask(n) == 0);
        Self { neg, n: n as u8 }
    }

    pub fn from_signs(signs: &[i8]) -> Result<Self> {
        check_dim(signs.len())?;
        let mut neg = 0u32;
        for (i, &s) in signs.iter().enumerate() {
            match s {
                1 => {}
                -1 => neg |= 1 << i,
                other => {
                    return Err(AuditError::InvalidParameter(format!(
                        "coordinate {} is {other}, expected -1 or +1",
                        i + 1
                    )))
                }
            }
        }
        Ok(Self { neg, n: signs.len() as u8 })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n as usize
    }

    #[inline]
    pub fn neg_mask(&self) -> u32 {
        self.neg
    }

    /// Sign of coordinate `i` (0-based).
    #[inline]
    pub fn get(&self, i: usize) -> i8 {
        if self.neg >> i & 1 == 1 {
            -1
        } else {
            1
        }
    }

    #[inline]
    pub fn with(self, i: usize, sign: i8) -> Self {
        debug_assert!(i < self.dim());
        let neg = if sign < 0 { self.neg | 1 << i } else { self.neg & !(1 << i) };
        Self { neg, n: self.n }
    }

    #[inline]
    pub fn flip(self, i: usize) -> Self {
        debug_assert!(i < self.dim());
        Self { neg: self.neg ^ (1 << i), n: self.n }
    }

    /// Flip every coordinate in `mask`.
    #[inline]
    pub fn flip_mask(self, mask: u32) -> Self {
        Self { neg: self.neg ^ (mask & full_mask(self.dim())), n: self.n }
    }

    pub fn signs(&self) -> Vec<i8> {
        (0..self.dim()).map(|i| self.get(i)).collect()
    }

    /// All `2^n` points ordered by their negative-coordinate mask.
    pub fn enumerate(n: usize) -> Result<impl Iterator<Item = PointVector>> {
        check_dim(n)?;
        Ok((0..=full_mask(n)).map(move |m| PointVector::raw(m, n)))
    }
}

impl fmt::Debug for PointVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PointVector({self})")
    }
}

impl fmt::Display for PointVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for i in 0..self.dim() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(if self.get(i) < 0 { "-1" } else { "+1" })?;
        }
        f.write_str(")")
    }
}

/// A subset `S` of `{1..n}`, bit `i` standing for coordinate `i + 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SubsetIndex(pub u32);

impl SubsetIndex {
    pub const EMPTY: SubsetIndex = SubsetIndex(0);

    pub fn singleton(i: usize) -> Self {
        SubsetIndex(1 << i)
    }

    /// From 0-based coordinates.
    pub fn from_coords(coords: &[usize]) -> Self {
        SubsetIndex(coords.iter().fold(0u32, |m, &i| m | 1 << i))
    }

    #[inline]
    pub fn mask(&self) -> u32 {
        self.0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    #[inline]
    pub fn insert(self, i: usize) -> Self {
        SubsetIndex(self.0 | 1 << i)
    }

    #[inline]
    pub fn remove(self, i: usize) -> Self {
        SubsetIndex(self.0 & !(1 << i))
    }

    /// 0-based member coordinates in increasing order.
    pub fn coords(&self) -> impl Iterator<Item = usize> {
        let mut m = self.0;
        std::iter::from_fn(move || {
            if m == 0 {
                None
            } else {
                let i = m.trailing_zeros() as usize;
                m &= m - 1;
                Some(i)
            }
        })
    }

    pub fn fits(&self, n: usize) -> bool {
        self.0 & !full_mask(n) == 0
    }

    /// Parse `{1,3}` / `1,3` / `{}` (1-based).
    pub fn parse(s: &str, n: usize) -> Result<Self> {
        let body = s.trim().trim_start_matches('{').trim_end_matches('}').trim();
        let mut mask = 0u32;
        if body.is_empty() {
            return Ok(SubsetIndex(0));
        }
        for tok in body.split(',') {
            let c: usize = tok
                .trim()
                .parse()
                .map_err(|_| AuditError::InvalidParameter(format!("bad coordinate '{tok}' in subset '{s}'")))?;
            if c == 0 || c > n {
                return Err(AuditError::InvalidParameter(format!("coordinate {c} outside 1..={n}")));
            }
            mask |= 1 << (c - 1);
        }
        Ok(SubsetIndex(mask))
    }
}

impl fmt::Debug for SubsetIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{self}")
    }
}

impl fmt::Display for SubsetIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.coords().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        f.write_str("}")
    }
}

/// Uniform-basis parity `chi_S(x) = prod_{i in S} x_i`.
#[inline]
pub fn parity(s: SubsetIndex, x: PointVector) -> f64 {
    if (s.0 & x.neg_mask()).count_ones() & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Subsets of `{1..n}` in the canonical order: by cardinality, then by mask.
pub fn canonical_order(n: usize) -> Vec<SubsetIndex> {
    let mut all: Vec<SubsetIndex> = (0..=full_mask(n)).map(SubsetIndex).collect();
    all.sort_by_key(|s| (s.len(), s.0));
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn signs_roundtrip() {
        let x = PointVector::from_signs(&[1, -1, -1, 1]).unwrap();
        assert_eq!(x.neg_mask(), 0b0110);
        assert_eq!(x.signs(), vec![1, -1, -1, 1]);
        assert_eq!(x.to_string(), "(+1,-1,-1,+1)");
        assert!(PointVector::from_signs(&[1, 0]).is_err());
        assert!(PointVector::from_signs(&[]).is_err());
    }

    #[test]
    fn dimension_bounds() {
        assert!(check_dim(30).is_ok());
        assert!(matches!(check_dim(31), Err(AuditError::InvalidDimension(31))));
        assert!(PointVector::from_neg_mask(0b100, 2).is_err());
    }

    #[test]
    fn subset_display_and_parse() {
        let s = SubsetIndex::from_coords(&[0, 2]);
        assert_eq!(s.to_string(), "{1,3}");
        assert_eq!(SubsetIndex::parse("{1,3}", 3).unwrap(), s);
        assert_eq!(SubsetIndex::parse("{}", 3).unwrap(), SubsetIndex::EMPTY);
        assert!(SubsetIndex::parse("{4}", 3).is_err());
    }

    #[test]
    fn canonical_order_is_by_size_then_mask() {
        let o = canonical_order(3);
        let masks: Vec<u32> = o.iter().map(|s| s.0).collect();
        assert_eq!(masks, vec![0, 1, 2, 4, 3, 5, 6, 7]);
    }

    proptest! {
        #[test]
        fn parity_is_multiplicative(n in 1usize..12, a in any::<u32>(), b in any::<u32>(), xm in any::<u32>()) {
            let m = full_mask(n);
            let x = PointVector::raw(xm & m, n);
            let (s, t) = (SubsetIndex(a & m), SubsetIndex(b & m));
            prop_assert_eq!(parity(s, x) * parity(t, x), parity(SubsetIndex(s.0 ^ t.0), x));
        }

        #[test]
        fn parity_matches_product_of_signs(n in 1usize..12, a in any::<u32>(), xm in any::<u32>()) {
            let m = full_mask(n);
            let x = PointVector::raw(xm & m, n);
            let s = SubsetIndex(a & m);
            let prod: i32 = s.coords().map(|i| x.get(i) as i32).product();
            prop_assert_eq!(parity(s, x), prod as f64);
        }
    }
}
