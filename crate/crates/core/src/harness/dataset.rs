//! CSV ingestion: every column is mapped to one or more `+-1` features by a schema.
//!
//! ```toml
//! label = "passed"
//! sensitive = "sex=F"        # name of an encoded feature
//! default = "sign"           # rule for columns not listed; omit to require full coverage
//!
//! [columns]
//! age = { threshold = 30 }   # value >= 30 -> +1
//! smoker = { binary = ["no", "yes"] }
//! sex = { one_hot = ["F", "M"] }   # features sex=F, sex=M
//! id = "ignore"
//! passed = "sign"            # -1/+1, 0/1 or false/true
//! ```
//!
//! A one-hot label column yields a multiclass model (class index = category position).

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use crate::dist::{DistributionSpec, Empirical};
use crate::error::{AuditError, Result};
use crate::models::zoo::LookupTable;
use crate::models::ModelOracle;
use crate::point::{PointVector, MAX_DIM};

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRule {
    Sign,
    Threshold(f64),
    /// `[negative, positive]` category names.
    Binary([String; 2]),
    OneHot(Vec<String>),
    Ignore,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    /// Label column; the last column when absent.
    pub label: Option<String>,
    /// Encoded feature name of the sensitive attribute; the first feature when absent.
    pub sensitive: Option<String>,
    pub default: Option<ColumnRule>,
    #[serde(default)]
    pub columns: BTreeMap<String, ColumnRule>,
}

impl CsvSchema {
    /// Every column already `+-1` or `0/1`, label last.
    pub fn all_sign() -> Self {
        Self { default: Some(ColumnRule::Sign), ..Self::default() }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| AuditError::Config(format!("schema: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn rule(&self, column: &str) -> Result<&ColumnRule> {
        self.columns
            .get(column)
            .or(self.default.as_ref())
            .ok_or_else(|| AuditError::Dataset(format!("schema has no rule for column '{column}'")))
    }
}

/// Rows after encoding.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetTable {
    pub features: Vec<String>,
    pub rows: Vec<PointVector>,
    pub labels: Vec<i32>,
    pub label: String,
    /// 0-based index into `features`.
    pub sensitive: usize,
    pub arity: usize,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub table: DatasetTable,
    /// Row frequencies.
    pub dist: DistributionSpec,
    /// Labels on the observed points; off-support queries fail.
    pub model: ModelOracle,
    /// Points that appear with more than one label (resolved by majority, ties to the smaller label).
    pub conflicts: usize,
}

fn cell_err(row: usize, column: &str, msg: String) -> AuditError {
    AuditError::Dataset(format!("row {row}, column '{column}': {msg}"))
}

fn sign_of(cell: &str, row: usize, column: &str) -> Result<i8> {
    match cell.trim().to_ascii_lowercase().as_str() {
        "1" | "+1" | "1.0" | "true" => Ok(1),
        "-1" | "0" | "-1.0" | "0.0" | "false" => Ok(-1),
        other => Err(cell_err(row, column, format!("'{other}' is not a sign (-1/+1, 0/1, false/true)"))),
    }
}

fn encode(rule: &ColumnRule, cell: &str, row: usize, column: &str, out: &mut Vec<i8>) -> Result<()> {
    let v = cell.trim();
    match rule {
        ColumnRule::Ignore => {}
        ColumnRule::Sign => out.push(sign_of(v, row, column)?),
        ColumnRule::Threshold(cut) => {
            let x: f64 = v.parse().map_err(|_| cell_err(row, column, format!("non-numeric value '{v}'")))?;
            out.push(if x >= *cut { 1 } else { -1 });
        }
        ColumnRule::Binary([neg, pos]) => out.push(if v == pos {
            1
        } else if v == neg {
            -1
        } else {
            return Err(cell_err(row, column, format!("unmapped category '{v}'")));
        }),
        ColumnRule::OneHot(cats) => {
            let k = cats.iter().position(|c| c == v).ok_or_else(|| cell_err(row, column, format!("unmapped category '{v}'")))?;
            out.extend((0..cats.len()).map(|j| if j == k { 1 } else { -1 }));
        }
    }
    Ok(())
}

fn label_of(rule: &ColumnRule, cell: &str, row: usize, column: &str) -> Result<(i32, usize)> {
    let v = cell.trim();
    match rule {
        ColumnRule::OneHot(cats) => cats
            .iter()
            .position(|c| c == v)
            .map(|k| (k as i32, cats.len()))
            .ok_or_else(|| cell_err(row, column, format!("unmapped label '{v}'"))),
        ColumnRule::Ignore => Err(AuditError::Dataset(format!("label column '{column}' is marked ignore"))),
        other => {
            let mut tmp = Vec::with_capacity(1);
            encode(other, v, row, column, &mut tmp)?;
            Ok((tmp[0] as i32, 2))
        }
    }
}

fn feature_names(column: &str, rule: &ColumnRule) -> Vec<String> {
    match rule {
        ColumnRule::Ignore => Vec::new(),
        ColumnRule::OneHot(cats) => cats.iter().map(|c| format!("{column}={c}")).collect(),
        _ => vec![column.to_string()],
    }
}

pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let f = std::fs::File::open(path).map_err(|e| AuditError::Dataset(format!("{}: {e}", path.display())))?;
    ingest_reader(f, schema)
}

pub fn ingest_reader<R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| AuditError::Dataset(format!("header: {e}")))?
        .iter()
        .map(String::from)
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(AuditError::Dataset("empty file".into()));
    }
    let label = schema.label.clone().unwrap_or_else(|| header[header.len() - 1].clone());
    let label_idx = header
        .iter()
        .position(|h| *h == label)
        .ok_or_else(|| AuditError::Dataset(format!("label column '{label}' not in header")))?;
    for k in schema.columns.keys() {
        if !header.contains(k) {
            return Err(AuditError::Dataset(format!("schema column '{k}' not in header")));
        }
    }
    let rules: Vec<&ColumnRule> = header.iter().map(|h| schema.rule(h)).collect::<Result<_>>()?;
    let mut features = Vec::new();
    for (i, (h, r)) in header.iter().zip(&rules).enumerate() {
        if i != label_idx {
            features.extend(feature_names(h, r));
        }
    }
    let n = features.len();
    if n == 0 || n > MAX_DIM {
        return Err(AuditError::Dataset(format!("{n} encoded features; need 1..={MAX_DIM}")));
    }
    let sensitive = match &schema.sensitive {
        Some(s) => features
            .iter()
            .position(|f| f == s)
            .ok_or_else(|| AuditError::Dataset(format!("sensitive feature '{s}' not among encoded features {features:?}")))?,
        None => 0,
    };

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut arity = 2;
    let mut signs = Vec::with_capacity(n);
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| AuditError::Dataset(format!("row {row}: {e}")))?;
        if rec.len() != header.len() {
            return Err(AuditError::Dataset(format!("row {row}: {} cells, header has {}", rec.len(), header.len())));
        }
        signs.clear();
        for (i, cell) in rec.iter().enumerate() {
            if cell.trim().is_empty() {
                return Err(cell_err(row, &header[i], "missing value".into()));
            }
            if i == label_idx {
                let (y, k) = label_of(rules[i], cell, row, &header[i])?;
                labels.push(y);
                arity = k;
            } else {
                encode(rules[i], cell, row, &header[i], &mut signs)?;
            }
        }
        rows.push(PointVector::from_signs(&signs)?);
    }
    if rows.is_empty() {
        return Err(AuditError::Dataset("empty file: no data rows".into()));
    }

    // Row frequencies and per-point label votes.
    let mut index: HashMap<PointVector, usize> = HashMap::new();
    let mut atoms = Vec::new();
    let mut counts = Vec::new();
    let mut votes: Vec<BTreeMap<i32, usize>> = Vec::new();
    for (x, y) in rows.iter().zip(&labels) {
        let k = *index.entry(*x).or_insert_with(|| {
            atoms.push(*x);
            counts.push(0.0);
            votes.push(BTreeMap::new());
            atoms.len() - 1
        });
        counts[k] += 1.0;
        *votes[k].entry(*y).or_insert(0) += 1;
    }
    let conflicts = votes.iter().filter(|v| v.len() > 1).count();
    let entries: Vec<(PointVector, i32)> = atoms
        .iter()
        .zip(&votes)
        .map(|(x, v)| {
            // max_by_key keeps the last maximum; iterate in reverse so ties go to the smaller label.
            let y = v.iter().rev().max_by_key(|(_, c)| **c).map(|(y, _)| *y).expect("at least one vote");
            (*x, y)
        })
        .collect();
    let model = ModelOracle::new(LookupTable::partial(n, arity, entries, None)?, format!("dataset:{label}"));
    let dist = DistributionSpec::Empirical(Empirical::from_counts(atoms, &counts)?);
    Ok(Dataset {
        table: DatasetTable { features, rows, labels, label, sensitive, arity },
        dist,
        model,
        conflicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{exact_fourier_spectrum, gram_schmidt_basis};
    use crate::rng::RandomSource;

    #[test]
    fn two_binary_rows() {
        let d = ingest_reader("a,b,y\n1,-1,1\n-1,1,-1\n".as_bytes(), &CsvSchema::all_sign()).unwrap();
        let e = d.dist.support(30).unwrap();
        assert_eq!(e.len(), 2);
        assert!(e.iter().all(|(_, w)| (*w - 0.5).abs() < 1e-15));
        assert_eq!(d.table.features, vec!["a", "b"]);
        assert_eq!(d.model.label(d.table.rows[0]).unwrap(), 1);
    }

    #[test]
    fn threshold_semantics() {
        let schema = CsvSchema::from_toml("label = \"y\"\n[columns]\nage = { threshold = 30 }\ny = \"sign\"\n").unwrap();
        let d = ingest_reader("age,y\n18,0\n45,1\n".as_bytes(), &schema).unwrap();
        assert_eq!(d.table.rows[0].signs(), vec![-1]);
        assert_eq!(d.table.rows[1].signs(), vec![1]);
        assert_eq!(d.table.labels, vec![-1, 1]);
    }

    #[test]
    fn one_hot_and_sensitive() {
        let schema = CsvSchema::from_toml(
            "label = \"y\"\nsensitive = \"sex=M\"\n[columns]\nsex = { one_hot = [\"F\", \"M\"] }\nsmoker = { binary = [\"no\", \"yes\"] }\ny = { one_hot = [\"a\", \"b\", \"c\"] }\n",
        )
        .unwrap();
        let d = ingest_reader("sex,smoker,y\nF,yes,a\nM,no,c\n".as_bytes(), &schema).unwrap();
        assert_eq!(d.table.features, vec!["sex=F", "sex=M", "smoker"]);
        assert_eq!(d.table.sensitive, 1);
        assert_eq!(d.table.arity, 3);
        assert_eq!(d.table.rows[0].signs(), vec![1, -1, 1]);
        assert_eq!(d.table.labels, vec![0, 2]);
    }

    #[test]
    fn named_errors() {
        let schema = CsvSchema::from_toml("[columns]\nc = { binary = [\"x\", \"y\"] }\nage = { threshold = 1 }\nl = \"sign\"\n").unwrap();
        let e = ingest_reader("c,age,l\nz,1,1\n".as_bytes(), &schema).unwrap_err().to_string();
        assert!(e.contains("unmapped category 'z'"), "{e}");
        let e = ingest_reader("c,age,l\nx,old,1\n".as_bytes(), &schema).unwrap_err().to_string();
        assert!(e.contains("non-numeric value 'old'"), "{e}");
        let e = ingest_reader("".as_bytes(), &schema).unwrap_err().to_string();
        assert!(e.contains("empty file"), "{e}");
        let e = ingest_reader("c,age,l\n".as_bytes(), &schema).unwrap_err().to_string();
        assert!(e.contains("empty file"), "{e}");
        let strict = CsvSchema::from_toml("[columns]\nl = \"sign\"\n").unwrap();
        let e = ingest_reader("c,l\n1,1\n".as_bytes(), &strict).unwrap_err().to_string();
        assert!(e.contains("no rule for column 'c'"), "{e}");
    }

    #[test]
    fn conflicting_labels_take_majority() {
        let d = ingest_reader("a,y\n1,1\n1,-1\n1,-1\n-1,1\n".as_bytes(), &CsvSchema::all_sign()).unwrap();
        assert_eq!(d.conflicts, 1);
        assert_eq!(d.model.label(PointVector::ones(1).unwrap()).unwrap(), -1);
    }

    #[test]
    fn synthetic_table_satisfies_parseval() {
        let mut rng = RandomSource::new(8);
        let mut text = String::from("a,b,c,d,e,y\n");
        for _ in 0..100 {
            let row: Vec<String> = (0..6).map(|_| if rng.unit() < 0.5 { "1".into() } else { "-1".into() }).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        let d = ingest_reader(text.as_bytes(), &CsvSchema::all_sign()).unwrap();
        let b = gram_schmidt_basis(&d.dist, 5).unwrap();
        let s = exact_fourier_spectrum(&d.model, &b).unwrap();
        assert!((s.parseval() - 1.0).abs() < 1e-6, "{}", s.parseval());
    }
}
