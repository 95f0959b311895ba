//! Mixed-type tabular data.
//!
//! A [`Frame`] holds feature columns only; a [`Dataset`] pairs a frame with an
//! optional target. Samplers and predictors take `&Frame`, so they cannot see
//! the target even by accident.

mod encode;
mod io;

pub use encode::{dummy_encode, one_hot_encode, standardize, EncodedGroup, EncodedMatrix, Standardized};
pub use io::{
    read_csv, read_csv_from, read_schema_json, read_schema_json_from, write_csv, write_schema_json,
};

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawColumnSchema", into = "RawColumnSchema")]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnKind {
    Continuous,
    Categorical { levels: Vec<String> },
}

impl ColumnSchema {
    pub fn continuous(name: impl Into<String>) -> Self {
        ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Continuous,
        }
    }

    /// Builds a categorical column; level lists must be non-empty and unique.
    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        levels: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let schema = ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Categorical {
                levels: levels.into_iter().map(Into::into).collect(),
            },
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, ColumnKind::Categorical { .. })
    }

    pub fn levels(&self) -> Option<&[String]> {
        match &self.kind {
            ColumnKind::Categorical { levels } => Some(levels),
            ColumnKind::Continuous => None,
        }
    }

    /// Number of encoded columns (1 for continuous, one per level otherwise).
    pub fn width(&self) -> usize {
        self.levels().map_or(1, <[String]>::len)
    }

    pub fn level_index(&self, label: &str) -> Option<u32> {
        self.levels()?
            .iter()
            .position(|l| l == label)
            .map(|i| i as u32)
    }

    fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Schema("empty column name".into()));
        }
        if let ColumnKind::Categorical { levels } = &self.kind {
            if levels.is_empty() {
                return Err(Error::Schema(format!(
                    "categorical column `{}` has no levels",
                    self.name
                )));
            }
            let mut seen = HashSet::new();
            for l in levels {
                if !seen.insert(l) {
                    return Err(Error::Schema(format!(
                        "categorical column `{}` repeats level `{l}`",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct RawColumnSchema {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<String>>,
}

impl TryFrom<RawColumnSchema> for ColumnSchema {
    type Error = Error;

    fn try_from(raw: RawColumnSchema) -> Result<Self> {
        let kind = match (raw.kind.as_str(), raw.levels) {
            ("continuous", None) => ColumnKind::Continuous,
            ("continuous", Some(_)) => {
                return Err(Error::Schema(format!(
                    "continuous column `{}` must not list levels",
                    raw.name
                )))
            }
            ("categorical", Some(levels)) => ColumnKind::Categorical { levels },
            ("categorical", None) => {
                return Err(Error::Schema(format!(
                    "categorical column `{}` needs a `levels` list",
                    raw.name
                )))
            }
            (other, _) => {
                return Err(Error::Schema(format!(
                    "column `{}` has unknown kind `{other}`",
                    raw.name
                )))
            }
        };
        let schema = ColumnSchema {
            name: raw.name,
            kind,
        };
        schema.validate()?;
        Ok(schema)
    }
}

impl From<ColumnSchema> for RawColumnSchema {
    fn from(s: ColumnSchema) -> Self {
        match s.kind {
            ColumnKind::Continuous => RawColumnSchema {
                name: s.name,
                kind: "continuous".into(),
                levels: None,
            },
            ColumnKind::Categorical { levels } => RawColumnSchema {
                name: s.name,
                kind: "categorical".into(),
                levels: Some(levels),
            },
        }
    }
}

/// One column of cells. Categorical cells are indices into the schema's levels.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Continuous(Vec<f64>),
    Categorical(Vec<u32>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Continuous(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_continuous(&self) -> Option<&[f64]> {
        match self {
            Column::Continuous(v) => Some(v),
            Column::Categorical(_) => None,
        }
    }

    pub fn as_categorical(&self) -> Option<&[u32]> {
        match self {
            Column::Categorical(v) => Some(v),
            Column::Continuous(_) => None,
        }
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Continuous(v) => Column::Continuous(rows.iter().map(|&i| v[i]).collect()),
            Column::Categorical(v) => Column::Categorical(rows.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// Feature columns with their schema, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    schema: Vec<ColumnSchema>,
    columns: Vec<Column>,
    n_rows: usize,
}

impl Frame {
    pub fn new(schema: Vec<ColumnSchema>, columns: Vec<Column>) -> Result<Self> {
        if schema.len() != columns.len() {
            return Err(Error::Dimension(format!(
                "{} schema entries but {} columns",
                schema.len(),
                columns.len()
            )));
        }
        let mut names = HashSet::new();
        for s in &schema {
            s.validate()?;
            if !names.insert(s.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name `{}`", s.name)));
            }
        }
        let n_rows = columns.first().map_or(0, Column::len);
        for (s, c) in schema.iter().zip(&columns) {
            if c.len() != n_rows {
                return Err(Error::Dimension(format!(
                    "column `{}` has {} rows, expected {n_rows}",
                    s.name,
                    c.len()
                )));
            }
            match (&s.kind, c) {
                (ColumnKind::Continuous, Column::Continuous(v)) => {
                    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                        return Err(Error::NonFinite(format!(
                            "column `{}` row {i} is {}",
                            s.name, v[i]
                        )));
                    }
                }
                (ColumnKind::Categorical { levels }, Column::Categorical(v)) => {
                    if let Some(&bad) = v.iter().find(|&&x| x as usize >= levels.len()) {
                        return Err(Error::Schema(format!(
                            "column `{}` has level index {bad} but only {} levels",
                            s.name,
                            levels.len()
                        )));
                    }
                }
                _ => {
                    return Err(Error::Schema(format!(
                        "column `{}` cells do not match its declared kind",
                        s.name
                    )))
                }
            }
        }
        Ok(Frame {
            schema,
            columns,
            n_rows,
        })
    }

    /// Frame with a fixed row count but no columns (intercept-only designs).
    pub fn empty(n_rows: usize) -> Frame {
        Frame {
            schema: Vec::new(),
            columns: Vec::new(),
            n_rows,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> &Column {
        &self.columns[j]
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.schema.iter().map(|s| s.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|s| s.name == name)
    }

    pub fn require_index(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn is_all_continuous(&self) -> bool {
        self.schema.iter().all(|s| !s.is_categorical())
    }

    /// Numeric cell value; categorical cells yield their level index.
    pub fn value(&self, row: usize, col: usize) -> f64 {
        match &self.columns[col] {
            Column::Continuous(v) => v[row],
            Column::Categorical(v) => v[row] as f64,
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Frame {
        Frame {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            n_rows: rows.len(),
        }
    }

    /// Keeps only the named columns, in the given order.
    pub fn select_columns(&self, names: &[&str]) -> Result<Frame> {
        let idx = names
            .iter()
            .map(|n| self.require_index(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Frame {
            schema: idx.iter().map(|&j| self.schema[j].clone()).collect(),
            columns: idx.iter().map(|&j| self.columns[j].clone()).collect(),
            n_rows: self.n_rows,
        })
    }

    pub fn drop_columns(&self, names: &[&str]) -> Result<Frame> {
        for n in names {
            self.require_index(n)?;
        }
        let keep: Vec<&str> = self.names().filter(|n| !names.contains(n)).collect();
        self.select_columns(&keep)
    }

    /// Copy of `self` with columns `cols` taken from `other`, which must share
    /// the schema and row count.
    pub fn with_columns_from(&self, other: &Frame, cols: &[usize]) -> Result<Frame> {
        self.check_compatible(other)?;
        let mut columns = self.columns.clone();
        for &j in cols {
            columns[j] = other.columns[j].clone();
        }
        Ok(Frame {
            schema: self.schema.clone(),
            columns,
            n_rows: self.n_rows,
        })
    }

    pub fn replace_column(&mut self, j: usize, column: Column) -> Result<()> {
        let probe = Frame::new(vec![self.schema[j].clone()], vec![column])?;
        if probe.n_rows != self.n_rows {
            return Err(Error::Dimension(format!(
                "replacement for `{}` has {} rows, expected {}",
                self.schema[j].name, probe.n_rows, self.n_rows
            )));
        }
        self.columns[j] = probe.columns.into_iter().next().expect("one column");
        Ok(())
    }

    pub fn check_compatible(&self, other: &Frame) -> Result<()> {
        if self.schema != other.schema {
            return Err(Error::Dimension("frames have different schemas".into()));
        }
        if self.n_rows != other.n_rows {
            return Err(Error::Dimension(format!(
                "frames have {} and {} rows",
                self.n_rows, other.n_rows
            )));
        }
        Ok(())
    }

    /// Stable 64-bit digest of the schema (FNV-1a over names, kinds, levels).
    pub fn fingerprint(&self) -> u64 {
        schema_fingerprint(&self.schema)
    }
}

pub fn schema_fingerprint(schema: &[ColumnSchema]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0100_0000_01b3);
    };
    for s in schema {
        feed(s.name.as_bytes());
        match &s.kind {
            ColumnKind::Continuous => feed(b"c"),
            ColumnKind::Categorical { levels } => {
                feed(b"k");
                for l in levels {
                    feed(l.as_bytes());
                }
            }
        }
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Continuous,
    Binary,
}

/// Response column. Binary targets are stored as 0.0 / 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub name: String,
    pub kind: TargetKind,
    pub values: Vec<f64>,
    /// Labels for 0 and 1 when the target came from a two-level column.
    pub labels: Option<[String; 2]>,
}

impl Target {
    pub fn continuous(name: impl Into<String>, values: Vec<f64>) -> Self {
        Target {
            name: name.into(),
            kind: TargetKind::Continuous,
            values,
            labels: None,
        }
    }

    pub fn binary(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Config("binary target values must be 0 or 1".into()));
        }
        Ok(Target {
            name: name.into(),
            kind: TargetKind::Binary,
            values,
            labels: None,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn select(&self, rows: &[usize]) -> Target {
        Target {
            name: self.name.clone(),
            kind: self.kind,
            values: rows.iter().map(|&i| self.values[i]).collect(),
            labels: self.labels.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Frame,
    pub target: Option<Target>,
}

impl Dataset {
    pub fn new(features: Frame, target: Option<Target>) -> Result<Self> {
        if let Some(t) = &target {
            if t.len() != features.n_rows() {
                return Err(Error::Dimension(format!(
                    "target has {} rows, features have {}",
                    t.len(),
                    features.n_rows()
                )));
            }
            if let Some(i) = t.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("target row {i}")));
            }
            if features.index_of(&t.name).is_some() {
                return Err(Error::Schema(format!(
                    "target `{}` is also a feature column",
                    t.name
                )));
            }
        }
        Ok(Dataset { features, target })
    }

    pub fn n_rows(&self) -> usize {
        self.features.n_rows()
    }

    pub fn target(&self) -> Result<&Target> {
        self.target
            .as_ref()
            .ok_or_else(|| Error::Config("dataset has no target column".into()))
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(rows),
            target: self.target.as_ref().map(|t| t.select(rows)),
        }
    }

    pub fn with_features(&self, features: Frame) -> Result<Dataset> {
        Dataset::new(features, self.target.clone())
    }

    /// All-continuous copy whose columns are the treatment (dummy) coding.
    pub fn dummy(&self) -> Result<(Dataset, EncodedMatrix)> {
        let enc = dummy_encode(&self.features);
        let frame = enc.to_frame()?;
        Ok((Dataset::new(frame, self.target.clone())?, enc))
    }

    /// All-continuous copy whose columns are the full one-hot encoding.
    pub fn one_hot(&self) -> Result<(Dataset, EncodedMatrix)> {
        let enc = one_hot_encode(&self.features);
        let frame = enc.to_frame()?;
        Ok((Dataset::new(frame, self.target.clone())?, enc))
    }
}

/// Uniform random train/test partition with `round(train_fraction * n)` rows
/// in the training part. Both parts keep the original row order.
pub fn split<R: Rng + ?Sized>(
    ds: &Dataset,
    train_fraction: f64,
    rng: &mut R,
) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = ds.n_rows();
    let n_train = (train_fraction * n as f64).round() as usize;
    if n < 2 || n_train == 0 || n_train >= n {
        return Err(Error::TooFewRows(format!(
            "{n} rows cannot be split into non-empty train and test parts"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let (train, test) = idx.split_at_mut(n_train);
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.select_rows(train), ds.select_rows(test)))
}
