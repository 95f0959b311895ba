use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Column, ColumnKind, ColumnSchema, Dataset, Frame, Target, TargetKind};
use crate::error::{Error, Result};

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum SchemaFile {
    Plain(Vec<ColumnSchema>),
    Wrapped { columns: Vec<ColumnSchema> },
}

/// Reads a schema file: either a JSON array of columns or an object with a
/// `columns` array (other keys, such as run metadata, are ignored).
pub fn read_schema_json(path: impl AsRef<Path>) -> Result<Vec<ColumnSchema>> {
    read_schema_json_from(File::open(path)?)
}

pub fn read_schema_json_from(reader: impl Read) -> Result<Vec<ColumnSchema>> {
    let file: SchemaFile = serde_json::from_reader(reader)?;
    Ok(match file {
        SchemaFile::Plain(c) | SchemaFile::Wrapped { columns: c } => c,
    })
}

pub fn write_schema_json(schema: &[ColumnSchema], w: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(w, schema)?;
    Ok(())
}

/// Reads a headered CSV. Columns absent from `schema` are ignored. The target,
/// if named, must be a schema column: continuous gives a regression target,
/// a two-level categorical gives a binary one (second level = 1). Lines
/// starting with `#` are skipped.
pub fn read_csv(
    path: impl AsRef<Path>,
    schema: &[ColumnSchema],
    target: Option<&str>,
) -> Result<Dataset> {
    read_csv_from(File::open(path)?, schema, target)
}

pub fn read_csv_from(
    reader: impl Read,
    schema: &[ColumnSchema],
    target: Option<&str>,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let positions = schema
        .iter()
        .map(|s| {
            headers
                .iter()
                .position(|h| h == s.name)
                .ok_or_else(|| Error::MissingColumn(s.name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(t) = target {
        if !schema.iter().any(|s| s.name == t) {
            return Err(Error::MissingColumn(t.to_string()));
        }
    }

    let mut cols: Vec<Column> = schema
        .iter()
        .map(|s| match s.kind {
            ColumnKind::Continuous => Column::Continuous(Vec::new()),
            ColumnKind::Categorical { .. } => Column::Categorical(Vec::new()),
        })
        .collect();

    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row_no = row + 1;
        for ((s, &pos), col) in schema.iter().zip(&positions).zip(cols.iter_mut()) {
            let cell = rec.get(pos).unwrap_or("");
            if cell.is_empty() || cell == "NA" {
                return Err(Error::MissingCell {
                    row: row_no,
                    column: s.name.clone(),
                });
            }
            match col {
                Column::Continuous(v) => {
                    let x: f64 = cell.parse().map_err(|_| Error::Parse {
                        row: row_no,
                        column: s.name.clone(),
                        value: cell.to_string(),
                    })?;
                    if x.is_nan() {
                        return Err(Error::MissingCell {
                            row: row_no,
                            column: s.name.clone(),
                        });
                    }
                    if !x.is_finite() {
                        return Err(Error::Parse {
                            row: row_no,
                            column: s.name.clone(),
                            value: cell.to_string(),
                        });
                    }
                    v.push(x);
                }
                Column::Categorical(v) => {
                    let l = s.level_index(cell).ok_or_else(|| Error::UnknownLevel {
                        row: row_no,
                        column: s.name.clone(),
                        value: cell.to_string(),
                    })?;
                    v.push(l);
                }
            }
        }
    }

    let mut feat_schema = Vec::with_capacity(schema.len());
    let mut feat_cols = Vec::with_capacity(schema.len());
    let mut tgt = None;
    for (s, c) in schema.iter().zip(cols) {
        if Some(s.name.as_str()) == target {
            tgt = Some(make_target(s, c)?);
        } else {
            feat_schema.push(s.clone());
            feat_cols.push(c);
        }
    }
    let features = Frame::new(feat_schema, feat_cols)?;
    Dataset::new(features, tgt)
}

fn make_target(s: &ColumnSchema, c: Column) -> Result<Target> {
    match (&s.kind, c) {
        (ColumnKind::Continuous, Column::Continuous(v)) => Ok(Target::continuous(&s.name, v)),
        (ColumnKind::Categorical { levels }, Column::Categorical(v)) if levels.len() == 2 => {
            Ok(Target {
                name: s.name.clone(),
                kind: TargetKind::Binary,
                values: v.into_iter().map(f64::from).collect(),
                labels: Some([levels[0].clone(), levels[1].clone()]),
            })
        }
        _ => Err(Error::Schema(format!(
            "target `{}` must be continuous or a two-level categorical",
            s.name
        ))),
    }
}

/// Writes features followed by the target column (if any).
pub fn write_csv(ds: &Dataset, w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = ds.features.names().collect();
    if let Some(t) = &ds.target {
        header.push(&t.name);
    }
    wtr.write_record(&header)?;
    let mut rec = Vec::with_capacity(header.len());
    for i in 0..ds.n_rows() {
        rec.clear();
        for (s, c) in ds.features.schema().iter().zip(ds.features.columns()) {
            rec.push(match c {
                Column::Continuous(v) => format!("{}", v[i]),
                Column::Categorical(v) => s.levels().expect("categorical")[v[i] as usize].clone(),
            });
        }
        if let Some(t) = &ds.target {
            rec.push(match (&t.kind, &t.labels) {
                (TargetKind::Binary, Some(labels)) => labels[t.values[i] as usize].clone(),
                _ => format!("{}", t.values[i]),
            });
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Schema of a dataset including its target, for writing alongside a CSV.
pub(crate) fn full_schema(ds: &Dataset) -> Vec<ColumnSchema> {
    let mut s = ds.features.schema().to_vec();
    if let Some(t) = &ds.target {
        s.push(match (&t.kind, &t.labels) {
            (TargetKind::Binary, Some(l)) => ColumnSchema {
                name: t.name.clone(),
                kind: ColumnKind::Categorical { levels: l.to_vec() },
            },
            // unlabeled binary targets are written as 0/1 numbers
            _ => ColumnSchema::continuous(t.name.clone()),
        });
    }
    s
}

impl Dataset {
    /// Schema covering features and target, matching [`write_csv`] output.
    pub fn full_schema(&self) -> Vec<ColumnSchema> {
        full_schema(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Vec<ColumnSchema> {
        vec![
            ColumnSchema::continuous("x"),
            ColumnSchema::categorical("c", ["a", "b"]).unwrap(),
            ColumnSchema::continuous("y"),
        ]
    }

    #[test]
    fn parses_three_rows() {
        let csv = "x,c,y,extra\n1.5,a,2,zz\n2,b,3,zz\n-1,a,0,zz\n";
        let ds = read_csv_from(csv.as_bytes(), &schema(), Some("y")).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.features.n_cols(), 2);
        assert_eq!(ds.features.column(1).as_categorical().unwrap(), &[0, 1, 0]);
        assert_eq!(ds.target.unwrap().values, vec![2.0, 3.0, 0.0]);
    }

    #[test]
    fn bad_number_names_row_and_column() {
        let csv = "x,c,y\n1,a,2\nfoo,b,3\n";
        let err = read_csv_from(csv.as_bytes(), &schema(), Some("y")).unwrap_err();
        match err {
            Error::Parse { row, column, value } => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "x", "foo"))
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn unknown_level() {
        let csv = "x,c,y\n1,z,2\n";
        let err = read_csv_from(csv.as_bytes(), &schema(), Some("y")).unwrap_err();
        assert!(matches!(err, Error::UnknownLevel { .. }));
    }

    #[test]
    fn missing_cell_and_column() {
        let csv = "x,c,y\n1,,2\n";
        let err = read_csv_from(csv.as_bytes(), &schema(), Some("y")).unwrap_err();
        assert!(matches!(err, Error::MissingCell { .. }));
        let csv = "x,y\n1,2\n";
        let err = read_csv_from(csv.as_bytes(), &schema(), Some("y")).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "c"));
    }

    #[test]
    fn schema_json_roundtrip() {
        let json = r#"[{"name":"x","kind":"continuous"},{"name":"c","kind":"categorical","levels":["a","b"]}]"#;
        let s: Vec<ColumnSchema> = serde_json::from_str(json).unwrap();
        assert_eq!(s, schema()[..2].to_vec());
        let back = serde_json::to_string(&s).unwrap();
        assert_eq!(back, json);
        let bad = r#"[{"name":"c","kind":"categorical"}]"#;
        assert!(serde_json::from_str::<Vec<ColumnSchema>>(bad).is_err());
    }

    #[test]
    fn write_then_read() {
        let csv = "x,c,y\n1.5,a,2\n2,b,3\n";
        let ds = read_csv_from(csv.as_bytes(), &schema(), Some("y")).unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back = read_csv_from(buf.as_slice(), &ds.full_schema(), Some("y")).unwrap();
        assert_eq!(back, ds);
    }
}
