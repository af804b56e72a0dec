use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

/// Sidecar schema declaring which CSV columns to read and which one is the label.
///
/// ```json
/// { "label": "y", "columns": [ { "name": "age", "kind": "numeric" } ] }
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub label: String,
    pub columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawColumn {
    pub name: String,
    pub data: ColumnData,
}

/// Typed table prior to binarization. Row order follows the source file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub columns: Vec<RawColumn>,
    pub labels: Vec<bool>,
    pub source: Option<String>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn column(&self, name: &str) -> Option<&RawColumn> {
        self.columns.iter().find(|c| c.name == name)
    }
}

pub fn load_raw(path: impl AsRef<Path>, schema: &Schema) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut table = read_raw(file, schema)?;
    table.source = Some(path.display().to_string());
    Ok(table)
}

pub fn read_raw<R: Read>(reader: R, schema: &Schema) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let position = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let label_pos = position(&schema.label)?;
    let positions = schema
        .columns
        .iter()
        .map(|c| position(&c.name))
        .collect::<Result<Vec<_>>>()?;

    let mut data: Vec<ColumnData> = schema
        .columns
        .iter()
        .map(|c| match c.kind {
            ColumnKind::Numeric => ColumnData::Numeric(Vec::new()),
            ColumnKind::Categorical => ColumnData::Categorical(Vec::new()),
        })
        .collect();
    let mut labels = Vec::new();

    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let label = &record[label_pos];
        labels.push(match label {
            "0" => false,
            "1" => true,
            _ => {
                return Err(Error::InvalidLabel {
                    row,
                    value: label.to_string(),
                })
            }
        });
        for ((col, &pos), spec) in data.iter_mut().zip(&positions).zip(&schema.columns) {
            let cell = &record[pos];
            match col {
                ColumnData::Numeric(v) => {
                    let x: f64 = cell.parse().map_err(|_| Error::TypeMismatch {
                        column: spec.name.clone(),
                        row,
                        value: cell.to_string(),
                    })?;
                    if !x.is_finite() {
                        return Err(Error::TypeMismatch {
                            column: spec.name.clone(),
                            row,
                            value: cell.to_string(),
                        });
                    }
                    v.push(x);
                }
                ColumnData::Categorical(v) => v.push(cell.to_string()),
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Data("table has no rows".into()));
    }

    Ok(RawTable {
        columns: schema
            .columns
            .iter()
            .zip(data)
            .map(|(spec, data)| RawColumn {
                name: spec.name.clone(),
                data,
            })
            .collect(),
        labels,
        source: None,
    })
}
