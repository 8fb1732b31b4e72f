//! Textual model descriptions used by the CLI and the sweep config.
//!
//! Grammar: `kind[:args][/key=value]...`, coordinates 1-based. Examples:
//! `dictator:1`, `maj3`, `parity:1,2,3/n=6`, `xor:1,2`, `ltf:1,-2,0.5/b=0.1`,
//! `junta:2,5:+--+/n=8`, `random-ltf/n=8/seed=3`, `random-tree:2/n=8/seed=1`,
//! `random-junta:3/n=12/seed=4`, `random-lookup/n=6/labels=3/seed=2`, `const:-1/n=4`.

use std::collections::BTreeMap;

use super::{zoo, ModelOracle};
use crate::error::{AuditError, Result};
use crate::rng::RandomSource;

#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    Constant { n: usize, label: i32 },
    Dictator { n: usize, coord: usize },
    Parity { n: usize, coords: Vec<usize> },
    Majority { n: usize, coords: Vec<usize> },
    Xor { n: usize, a: usize, b: usize },
    Ltf { weights: Vec<f64>, bias: f64 },
    Junta { n: usize, coords: Vec<usize>, table: Vec<i32>, arity: usize },
    RandomLtf { n: usize, seed: u64 },
    RandomTree { n: usize, depth: usize, seed: u64 },
    RandomJunta { n: usize, k: usize, seed: u64 },
    RandomLookup { n: usize, arity: usize, seed: u64 },
}

fn bad(msg: impl Into<String>) -> AuditError {
    AuditError::InvalidSpec(msg.into())
}

fn coords(list: &str) -> Result<Vec<usize>> {
    list.split(',')
        .map(|t| match t.trim().parse::<usize>() {
            Ok(c) if c >= 1 => Ok(c - 1),
            _ => Err(bad(format!("bad coordinate '{t}'"))),
        })
        .collect()
}

impl ModelSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut parts = text.trim().split('/');
        let head = parts.next().unwrap_or_default();
        let mut opts = BTreeMap::new();
        for p in parts {
            let (k, v) = p.split_once('=').ok_or_else(|| bad(format!("option '{p}' is not key=value")))?;
            opts.insert(k.trim().to_string(), v.trim().to_string());
        }
        let (kind, args) = match head.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (head, None),
        };
        let num = |key: &str| -> Result<Option<u64>> {
            opts.get(key)
                .map(|v| v.parse::<u64>().map_err(|_| bad(format!("option {key}={v} is not an integer"))))
                .transpose()
        };
        let n_opt = num("n")?.map(|v| v as usize);
        let seed = num("seed")?.unwrap_or(0);
        let need_n = || n_opt.ok_or_else(|| bad(format!("'{kind}' needs /n=<dim>")));
        let need_args = || args.ok_or_else(|| bad(format!("'{kind}' needs arguments")));
        let max_or = |cs: &[usize]| n_opt.unwrap_or_else(|| cs.iter().max().map_or(1, |m| m + 1));

        let spec = match kind {
            "const" | "constant" => {
                let label = need_args()?.parse::<i32>().map_err(|_| bad("constant label must be -1 or 1"))?;
                ModelSpec::Constant { n: need_n()?, label }
            }
            "dictator" => {
                let c = coords(need_args()?)?;
                if c.len() != 1 {
                    return Err(bad("dictator takes one coordinate"));
                }
                ModelSpec::Dictator { n: max_or(&c), coord: c[0] }
            }
            "parity" => {
                let c = coords(need_args()?)?;
                ModelSpec::Parity { n: max_or(&c), coords: c }
            }
            "maj3" => ModelSpec::Majority { n: n_opt.unwrap_or(3), coords: vec![0, 1, 2] },
            "majority" | "maj" => {
                let c = coords(need_args()?)?;
                ModelSpec::Majority { n: max_or(&c), coords: c }
            }
            "xor" => {
                let c = coords(need_args()?)?;
                if c.len() != 2 {
                    return Err(bad("xor takes two coordinates"));
                }
                ModelSpec::Xor { n: max_or(&c), a: c[0], b: c[1] }
            }
            "ltf" => {
                let weights = need_args()?
                    .split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|_| bad(format!("bad weight '{t}'"))))
                    .collect::<Result<Vec<_>>>()?;
                let bias = match opts.get("b") {
                    Some(v) => v.parse::<f64>().map_err(|_| bad(format!("bad bias '{v}'")))?,
                    None => 0.0,
                };
                ModelSpec::Ltf { weights, bias }
            }
            "junta" => {
                let (list, table) = need_args()?.split_once(':').ok_or_else(|| bad("junta needs coords:table"))?;
                let c = coords(list)?;
                let arity = num("labels")?.map_or(2, |v| v as usize);
                let table = table
                    .chars()
                    .map(|ch| match ch {
                        '+' if arity == 2 => Ok(1),
                        '-' if arity == 2 => Ok(-1),
                        d if arity > 2 && d.is_ascii_digit() => Ok(d.to_digit(10).unwrap_or(0) as i32),
                        other => Err(bad(format!("bad table symbol '{other}'"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                ModelSpec::Junta { n: max_or(&c), coords: c, table, arity }
            }
            "random-ltf" => ModelSpec::RandomLtf { n: need_n()?, seed },
            "random-tree" => {
                let depth = need_args()?.parse().map_err(|_| bad("tree depth must be an integer"))?;
                ModelSpec::RandomTree { n: need_n()?, depth, seed }
            }
            "random-junta" => {
                let k = need_args()?.parse().map_err(|_| bad("junta size must be an integer"))?;
                ModelSpec::RandomJunta { n: need_n()?, k, seed }
            }
            "random-lookup" => {
                let arity = num("labels")?.map_or(2, |v| v as usize);
                ModelSpec::RandomLookup { n: need_n()?, arity, seed }
            }
            other => return Err(bad(format!("unknown model kind '{other}'"))),
        };
        Ok(spec)
    }
}

pub fn build_model(spec: &ModelSpec) -> Result<ModelOracle> {
    match spec {
        ModelSpec::Constant { n, label } => zoo::constant(*n, *label),
        ModelSpec::Dictator { n, coord } => zoo::dictator(*n, *coord),
        ModelSpec::Parity { n, coords } => zoo::parity(*n, coords),
        ModelSpec::Majority { n, coords } => zoo::majority(*n, coords),
        ModelSpec::Xor { n, a, b } => zoo::xor(*n, *a, *b),
        ModelSpec::Ltf { weights, bias } => zoo::ltf(weights.clone(), *bias),
        ModelSpec::Junta { n, coords, table, arity } => zoo::junta(*n, coords.clone(), table.clone(), *arity),
        ModelSpec::RandomLtf { n, seed } => zoo::random_ltf(*n, &mut RandomSource::new(*seed)),
        ModelSpec::RandomTree { n, depth, seed } => zoo::random_tree(*n, *depth, &mut RandomSource::new(*seed)),
        ModelSpec::RandomJunta { n, k, seed } => zoo::random_junta(*n, *k, &mut RandomSource::new(*seed)),
        ModelSpec::RandomLookup { n, arity, seed } => zoo::random_lookup(*n, *arity, &mut RandomSource::new(*seed)),
    }
}
