//! In-process model backends and constructors for common test functions.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{Backend, ModelOracle};
use crate::error::{AuditError, OracleError, Result};
use crate::point::{check_dim, PointVector};
use crate::rng::RandomSource;

fn check_label(label: i32, arity: usize) -> Result<()> {
    let ok = if arity == 2 { label == 1 || label == -1 } else { label >= 0 && (label as usize) < arity };
    if ok {
        Ok(())
    } else {
        Err(AuditError::InvalidSpec(format!("label {label} invalid for arity {arity}")))
    }
}

fn check_arity(arity: usize) -> Result<()> {
    if arity < 2 {
        return Err(AuditError::InvalidSpec(format!("arity {arity} < 2")));
    }
    Ok(())
}

/// Truth table keyed by negative-coordinate mask. Points missing from the table get
/// `default`, or an off-support error when there is none.
#[derive(Clone, Debug)]
pub struct LookupTable {
    n: usize,
    arity: usize,
    table: HashMap<u32, i32>,
    default: Option<i32>,
}

impl LookupTable {
    /// Total table over all `2^n` points, indexed by mask.
    pub fn dense(n: usize, arity: usize, table: Vec<i32>) -> Result<Self> {
        check_dim(n)?;
        check_arity(arity)?;
        if n > 24 || table.len() != 1usize << n {
            return Err(AuditError::InvalidSpec(format!(
                "truth table has {} entries, a total table over n = {n} needs {}",
                table.len(),
                1u64 << n
            )));
        }
        for &y in &table {
            check_label(y, arity)?;
        }
        Ok(Self { n, arity, table: table.into_iter().enumerate().map(|(m, y)| (m as u32, y)).collect(), default: None })
    }

    /// Table defined on a subset of points.
    pub fn partial(n: usize, arity: usize, entries: Vec<(PointVector, i32)>, default: Option<i32>) -> Result<Self> {
        check_dim(n)?;
        check_arity(arity)?;
        let mut table = HashMap::with_capacity(entries.len());
        for (x, y) in entries {
            if x.dim() != n {
                return Err(AuditError::InvalidSpec(format!("entry {x} has dimension {}, expected {n}", x.dim())));
            }
            check_label(y, arity)?;
            table.insert(x.neg_mask(), y);
        }
        if let Some(d) = default {
            check_label(d, arity)?;
        }
        Ok(Self { n, arity, table, default })
    }
}

impl Backend for LookupTable {
    fn dim(&self) -> usize {
        self.n
    }

    fn arity(&self) -> usize {
        self.arity
    }

    fn classify(&self, xs: &[PointVector]) -> Result<Vec<i32>, OracleError> {
        xs.iter()
            .map(|x| match self.table.get(&x.neg_mask()).copied().or(self.default) {
                Some(y) => Ok(y),
                None => Err(OracleError::OffSupport(*x)),
            })
            .collect()
    }
}

/// `sign(w . x + b)`, ties to +1.
#[derive(Clone, Debug)]
pub struct LinearThreshold {
    w: Vec<f64>,
    b: f64,
}

impl LinearThreshold {
    pub fn new(w: Vec<f64>, b: f64) -> Result<Self> {
        check_dim(w.len())?;
        if !w.iter().chain(std::iter::once(&b)).all(|v| v.is_finite()) {
            return Err(AuditError::InvalidSpec("non-finite weight or bias".into()));
        }
        Ok(Self { w, b })
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn bias(&self) -> f64 {
        self.b
    }

    #[inline]
    fn eval(&self, x: PointVector) -> i32 {
        let s: f64 = self.w.iter().enumerate().map(|(i, w)| w * x.get(i) as f64).sum::<f64>() + self.b;
        if s >= 0.0 {
            1
        } else {
            -1
        }
    }
}

impl Backend for LinearThreshold {
    fn dim(&self) -> usize {
        self.w.len()
    }

    fn arity(&self) -> usize {
        2
    }

    fn classify(&self, xs: &[PointVector]) -> Result<Vec<i32>, OracleError> {
        Ok(xs.iter().map(|x| self.eval(*x)).collect())
    }
}

/// A function of the coordinates in `coords` only. `table` is indexed by the
/// local negative mask: bit `j` set when `x[coords[j]] = -1`.
#[derive(Clone, Debug)]
pub struct Junta {
    n: usize,
    arity: usize,
    coords: Vec<usize>,
    table: Vec<i32>,
}

impl Junta {
    pub fn new(n: usize, coords: Vec<usize>, table: Vec<i32>, arity: usize) -> Result<Self> {
        check_dim(n)?;
        check_arity(arity)?;
        let mut seen = 0u32;
        for &c in &coords {
            if c >= n {
                return Err(AuditError::InvalidSpec(format!("junta coordinate {} outside 1..={n}", c + 1)));
            }
            if seen >> c & 1 == 1 {
                return Err(AuditError::InvalidSpec(format!("junta coordinate {} repeated", c + 1)));
            }
            seen |= 1 << c;
        }
        if coords.len() > 20 || table.len() != 1usize << coords.len() {
            return Err(AuditError::InvalidSpec(format!(
                "junta on {} coordinates needs {} table entries, got {}",
                coords.len(),
                1u64 << coords.len().min(63),
                table.len()
            )));
        }
        for &y in &table {
            check_label(y, arity)?;
        }
        Ok(Self { n, arity, coords, table })
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    #[inline]
    fn eval(&self, x: PointVector) -> i32 {
        let local = self.coords.iter().enumerate().fold(0usize, |m, (j, &c)| m | ((x.neg_mask() >> c & 1) as usize) << j);
        self.table[local]
    }
}

impl Backend for Junta {
    fn dim(&self) -> usize {
        self.n
    }

    fn arity(&self) -> usize {
        self.arity
    }

    fn classify(&self, xs: &[PointVector]) -> Result<Vec<i32>, OracleError> {
        Ok(xs.iter().map(|x| self.eval(*x)).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TreeNode {
    Leaf(i32),
    /// Route on coordinate `coord` (0-based): `plus` when `x = +1`.
    Split { coord: usize, plus: Box<TreeNode>, minus: Box<TreeNode> },
}

impl TreeNode {
    fn eval(&self, x: PointVector) -> i32 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf(y) => return *y,
                TreeNode::Split { coord, plus, minus } => {
                    node = if x.get(*coord) > 0 { plus } else { minus };
                }
            }
        }
    }

    fn check(&self, n: usize, arity: usize) -> Result<()> {
        match self {
            TreeNode::Leaf(y) => check_label(*y, arity),
            TreeNode::Split { coord, plus, minus } => {
                if *coord >= n {
                    return Err(AuditError::InvalidSpec(format!("tree splits on coordinate {} > n", coord + 1)));
                }
                plus.check(n, arity)?;
                minus.check(n, arity)
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 0,
            TreeNode::Split { plus, minus, .. } => 1 + plus.depth().max(minus.depth()),
        }
    }
}

/// Axis-aligned binary decision tree; total by construction.
#[derive(Clone, Debug)]
pub struct DecisionStumpTree {
    n: usize,
    arity: usize,
    root: TreeNode,
}

impl DecisionStumpTree {
    pub fn new(n: usize, root: TreeNode, arity: usize) -> Result<Self> {
        check_dim(n)?;
        check_arity(arity)?;
        root.check(n, arity)?;
        Ok(Self { n, arity, root })
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }
}

impl Backend for DecisionStumpTree {
    fn dim(&self) -> usize {
        self.n
    }

    fn arity(&self) -> usize {
        self.arity
    }

    fn classify(&self, xs: &[PointVector]) -> Result<Vec<i32>, OracleError> {
        Ok(xs.iter().map(|x| self.root.eval(*x)).collect())
    }
}

pub fn constant(n: usize, label: i32) -> Result<ModelOracle> {
    Ok(ModelOracle::new(Junta::new(n, vec![], vec![label], 2)?, format!("const:{label}")))
}

/// `h(x) = x_i` (0-based `i`).
pub fn dictator(n: usize, i: usize) -> Result<ModelOracle> {
    Ok(ModelOracle::new(Junta::new(n, vec![i], vec![1, -1], 2)?, format!("dictator:{}", i + 1)))
}

/// `h(x) = prod_{i in coords} x_i`.
pub fn parity(n: usize, coords: &[usize]) -> Result<ModelOracle> {
    let table = (0..1usize << coords.len()).map(|m| if m.count_ones() % 2 == 1 { -1 } else { 1 }).collect();
    Ok(ModelOracle::new(Junta::new(n, coords.to_vec(), table, 2)?, format!("parity:{}", one_based(coords))))
}

/// Majority vote over an odd number of coordinates.
pub fn majority(n: usize, coords: &[usize]) -> Result<ModelOracle> {
    if coords.len() % 2 == 0 {
        return Err(AuditError::InvalidSpec("majority needs an odd number of coordinates".into()));
    }
    let k = coords.len() as u32;
    let table = (0..1usize << coords.len()).map(|m| if 2 * m.count_ones() < k { 1 } else { -1 }).collect();
    Ok(ModelOracle::new(Junta::new(n, coords.to_vec(), table, 2)?, format!("majority:{}", one_based(coords))))
}

/// XOR of coordinates `a` and `b` with bits `(1 + x) / 2` and label `2 y - 1`,
/// so `h(+1, +1) = -1`; equivalently `h(x) = -x_a x_b`.
pub fn xor(n: usize, a: usize, b: usize) -> Result<ModelOracle> {
    Ok(ModelOracle::new(Junta::new(n, vec![a, b], vec![-1, 1, 1, -1], 2)?, format!("xor:{},{}", a + 1, b + 1)))
}

pub fn ltf(w: Vec<f64>, b: f64) -> Result<ModelOracle> {
    Ok(ModelOracle::new(LinearThreshold::new(w, b)?, "ltf"))
}

pub fn junta(n: usize, coords: Vec<usize>, table: Vec<i32>, arity: usize) -> Result<ModelOracle> {
    let name = format!("junta:{}", one_based(&coords));
    Ok(ModelOracle::new(Junta::new(n, coords, table, arity)?, name))
}

pub fn tree(n: usize, root: TreeNode, arity: usize) -> Result<ModelOracle> {
    Ok(ModelOracle::new(DecisionStumpTree::new(n, root, arity)?, "tree"))
}

pub fn lookup(n: usize, arity: usize, table: Vec<i32>) -> Result<ModelOracle> {
    Ok(ModelOracle::new(LookupTable::dense(n, arity, table)?, "lookup"))
}

/// Weights uniform in `[-1, 1]`, bias uniform in `[-0.5, 0.5]`.
pub fn random_ltf(n: usize, rng: &mut RandomSource) -> Result<ModelOracle> {
    check_dim(n)?;
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let b = rng.random_range(-0.5..=0.5);
    Ok(ModelOracle::new(LinearThreshold::new(w, b)?, "random-ltf"))
}

/// Complete tree of the given depth; no coordinate repeats along a path and the
/// leaves are not all equal.
pub fn random_tree(n: usize, depth: usize, rng: &mut RandomSource) -> Result<ModelOracle> {
    check_dim(n)?;
    if depth > n {
        return Err(AuditError::InvalidSpec(format!("tree depth {depth} exceeds n = {n}")));
    }
    fn grow(n: usize, depth: usize, used: u32, rng: &mut RandomSource, leaves: &mut Vec<i32>) -> TreeNode {
        if depth == 0 {
            let y = if rng.random_bool(0.5) { 1 } else { -1 };
            leaves.push(y);
            return TreeNode::Leaf(y);
        }
        let free: Vec<usize> = (0..n).filter(|i| used >> i & 1 == 0).collect();
        let coord = free[rng.random_range(0..free.len())];
        let plus = grow(n, depth - 1, used | 1 << coord, rng, leaves);
        let minus = grow(n, depth - 1, used | 1 << coord, rng, leaves);
        TreeNode::Split { coord, plus: Box::new(plus), minus: Box::new(minus) }
    }
    loop {
        let mut leaves = Vec::new();
        let root = grow(n, depth, 0, rng, &mut leaves);
        if depth == 0 || leaves.iter().any(|&y| y != leaves[0]) {
            return Ok(ModelOracle::new(DecisionStumpTree::new(n, root, 2)?, format!("random-tree:{depth}")));
        }
    }
}

/// A function of `k` distinct random coordinates with a uniformly random truth table.
pub fn random_junta(n: usize, k: usize, rng: &mut RandomSource) -> Result<ModelOracle> {
    check_dim(n)?;
    if k > n {
        return Err(AuditError::InvalidSpec(format!("junta size {k} exceeds n = {n}")));
    }
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(rng);
    let mut coords: Vec<usize> = all[..k].to_vec();
    coords.sort_unstable();
    let table = (0..1usize << k).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
    junta(n, coords, table, 2)
}

/// Dense lookup table with labels drawn uniformly from the arity.
pub fn random_lookup(n: usize, arity: usize, rng: &mut RandomSource) -> Result<ModelOracle> {
    check_dim(n)?;
    let table = (0..1usize << n)
        .map(|_| {
            if arity == 2 {
                if rng.random_bool(0.5) {
                    1
                } else {
                    -1
                }
            } else {
                rng.random_range(0..arity as i32)
            }
        })
        .collect();
    lookup(n, arity, table)
}

fn one_based(coords: &[usize]) -> String {
    coords.iter().map(|c| (c + 1).to_string()).collect::<Vec<_>>().join(",")
}
