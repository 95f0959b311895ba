use std::ops::Range;

use nalgebra::DMatrix;

use super::{Column, ColumnKind, ColumnSchema, Frame};
use crate::error::{Error, Result};

/// Encoded-column range belonging to one original column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedGroup {
    pub name: String,
    pub range: Range<usize>,
    pub categorical: bool,
}

/// Real-valued design with a map back to the original columns.
///
/// Categorical columns expand to one indicator per level; no reference level
/// is dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    pub values: DMatrix<f64>,
    pub names: Vec<String>,
    pub groups: Vec<EncodedGroup>,
}

impl EncodedMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn group(&self, name: &str) -> Option<&EncodedGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    /// Encoded columns viewed as an all-continuous frame.
    pub fn to_frame(&self) -> Result<Frame> {
        let schema = self
            .names
            .iter()
            .map(|n| ColumnSchema::continuous(n.clone()))
            .collect();
        let columns = (0..self.n_cols())
            .map(|j| Column::Continuous(self.values.column(j).iter().copied().collect()))
            .collect();
        Frame::new(schema, columns)
    }

    /// Inverse of [`one_hot_encode`]: categorical groups take the argmax of
    /// their indicators (first maximum wins).
    pub fn decode(&self, schema: &[ColumnSchema]) -> Result<Frame> {
        if schema.len() != self.groups.len() {
            return Err(Error::Dimension(format!(
                "schema has {} columns, encoding has {} groups",
                schema.len(),
                self.groups.len()
            )));
        }
        let mut columns = Vec::with_capacity(schema.len());
        for (s, g) in schema.iter().zip(&self.groups) {
            if s.width() != g.range.len() || s.name != g.name {
                return Err(Error::Dimension(format!(
                    "group `{}` does not match schema column `{}`",
                    g.name, s.name
                )));
            }
            let col = match s.kind {
                ColumnKind::Continuous => {
                    Column::Continuous(self.values.column(g.range.start).iter().copied().collect())
                }
                ColumnKind::Categorical { .. } => Column::Categorical(
                    (0..self.n_rows())
                        .map(|i| {
                            let mut best = 0;
                            for k in 1..g.range.len() {
                                if self.values[(i, g.range.start + k)]
                                    > self.values[(i, g.range.start + best)]
                                {
                                    best = k;
                                }
                            }
                            best as u32
                        })
                        .collect(),
                ),
            };
            columns.push(col);
        }
        Frame::new(schema.to_vec(), columns)
    }
}

/// Full one-hot encoding, columns in schema order. Indicator names are
/// `column=level`.
pub fn one_hot_encode(frame: &Frame) -> EncodedMatrix {
    let n = frame.n_rows();
    let q: usize = frame.schema().iter().map(ColumnSchema::width).sum();
    let mut values = DMatrix::zeros(n, q);
    let mut names = Vec::with_capacity(q);
    let mut groups = Vec::with_capacity(frame.n_cols());
    let mut offset = 0;
    for (s, c) in frame.schema().iter().zip(frame.columns()) {
        let width = s.width();
        match (&s.kind, c) {
            (ColumnKind::Continuous, Column::Continuous(v)) => {
                values.column_mut(offset).copy_from_slice(v);
                names.push(s.name.clone());
            }
            (ColumnKind::Categorical { levels }, Column::Categorical(v)) => {
                for (i, &l) in v.iter().enumerate() {
                    values[(i, offset + l as usize)] = 1.0;
                }
                names.extend(levels.iter().map(|l| format!("{}={l}", s.name)));
            }
            _ => unreachable!("frame construction checks kinds"),
        }
        groups.push(EncodedGroup {
            name: s.name.clone(),
            range: offset..offset + width,
            categorical: s.is_categorical(),
        });
        offset += width;
    }
    EncodedMatrix {
        values,
        names,
        groups,
    }
}

/// Treatment (dummy) coding: like [`one_hot_encode`] but without the
/// indicator of each categorical column's first level, so the indicators of
/// one column are not collinear with the intercept.
pub fn dummy_encode(frame: &Frame) -> EncodedMatrix {
    let full = one_hot_encode(frame);
    let mut keep = Vec::with_capacity(full.n_cols());
    let mut groups = Vec::with_capacity(full.groups.len());
    for g in &full.groups {
        let start = keep.len();
        let skip = usize::from(g.categorical);
        keep.extend(g.range.clone().skip(skip));
        groups.push(EncodedGroup {
            name: g.name.clone(),
            range: start..keep.len(),
            categorical: g.categorical,
        });
    }
    EncodedMatrix {
        values: full.values.select_columns(&keep),
        names: keep.iter().map(|&j| full.names[j].clone()).collect(),
        groups,
    }
}

/// Standardized matrix plus the per-column centers and scales used.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub matrix: EncodedMatrix,
    pub centers: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardized {
    pub fn unstandardize(&self) -> DMatrix<f64> {
        let mut out = self.matrix.values.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            for v in col.iter_mut() {
                *v = *v * self.scales[j] + self.centers[j];
            }
        }
        out
    }
}

/// Centers and scales columns to sample mean 0 / sample sd 1 (n - 1
/// denominator). With `continuous_only`, indicator columns are left as is.
/// Zero-variance columns are centered and get scale 1.
pub fn standardize(m: &EncodedMatrix, continuous_only: bool) -> Standardized {
    let q = m.n_cols();
    let n = m.n_rows();
    let mut centers = vec![0.0; q];
    let mut scales = vec![1.0; q];
    let mut selected = vec![!continuous_only; q];
    if continuous_only {
        for g in &m.groups {
            if !g.categorical {
                for j in g.range.clone() {
                    selected[j] = true;
                }
            }
        }
    }
    let mut values = m.values.clone();
    for j in 0..q {
        if !selected[j] || n == 0 {
            continue;
        }
        let col = values.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
        let scale = if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 1.0 };
        centers[j] = mean;
        scales[j] = scale;
        for v in values.column_mut(j).iter_mut() {
            *v = (*v - mean) / scale;
        }
    }
    Standardized {
        matrix: EncodedMatrix {
            values,
            names: m.names.clone(),
            groups: m.groups.clone(),
        },
        centers,
        scales,
    }
}
