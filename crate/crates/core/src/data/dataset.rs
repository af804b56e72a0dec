use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bitmask::BitMask;
use crate::error::{Error, Result};

/// How a binary feature was derived from a raw column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureDef {
    /// `column <= threshold`
    Threshold { column: String, threshold: f64 },
    /// `column == level`
    Level { column: String, level: String },
    /// A numeric column that is already 0/1, copied as-is.
    Passthrough { column: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<String>,
    pub quantiles: Option<usize>,
    pub features: Vec<FeatureDef>,
}

/// `M` examples over `D` binary features, stored column-wise as bit masks.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDataset {
    features: Vec<BitMask>,
    labels: BitMask,
    names: Vec<String>,
    pub provenance: Provenance,
}

impl BinaryDataset {
    pub fn new(features: Vec<BitMask>, labels: BitMask, names: Vec<String>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Data("dataset needs at least one feature".into()));
        }
        if features.len() != names.len() {
            return Err(Error::LengthMismatch {
                expected: features.len(),
                found: names.len(),
            });
        }
        if let Some(f) = features.iter().find(|f| f.len() != labels.len()) {
            return Err(Error::LengthMismatch {
                expected: labels.len(),
                found: f.len(),
            });
        }
        let mut seen = HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Data(format!("duplicate feature name {dup:?}")));
        }
        Ok(BinaryDataset {
            features,
            labels,
            names,
            provenance: Provenance::default(),
        })
    }

    /// Builds a dataset from row-major 0/1 data; handy for small fixtures.
    pub fn from_rows(rows: &[Vec<bool>], labels: &[bool], names: Option<Vec<String>>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: labels.len(),
                found: rows.len(),
            });
        }
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Data("rows have different arity".into()));
        }
        let features = (0..d)
            .map(|j| BitMask::from_bools(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()))
            .collect();
        let names = names.unwrap_or_else(|| (0..d).map(|j| format!("f{}", j + 1)).collect());
        BinaryDataset::new(features, BitMask::from_bools(labels), names)
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    #[inline]
    pub fn feature(&self, j: usize) -> &BitMask {
        &self.features[j]
    }

    pub fn features(&self) -> &[BitMask] {
        &self.features
    }

    #[inline]
    pub fn labels(&self) -> &BitMask {
        &self.labels
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    #[inline]
    pub fn label(&self, i: usize) -> bool {
        self.labels.get(i)
    }

    pub fn row(&self, i: usize) -> Vec<bool> {
        self.features.iter().map(|f| f.get(i)).collect()
    }

    /// Majority training label; ties resolve to 1.
    pub fn majority_label(&self) -> bool {
        2 * self.labels.count() >= self.n_rows()
    }

    pub fn subset(&self, indices: &[usize]) -> BinaryDataset {
        BinaryDataset {
            features: self.features.iter().map(|f| f.select(indices)).collect(),
            labels: self.labels.select(indices),
            names: self.names.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Writes the dataset as CSV: one 0/1 column per feature, then `label`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.names.iter().map(String::as_str).collect();
        header.push("label");
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.n_rows() {
            record.clear();
            record.extend(self.features.iter().map(|f| if f.get(i) { "1" } else { "0" }));
            record.push(if self.label(i) { "1" } else { "0" });
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads the format produced by [`BinaryDataset::write_csv`].
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let label_pos = headers
            .iter()
            .position(|h| h == "label")
            .ok_or_else(|| Error::MissingColumn("label".into()))?;
        let names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != label_pos)
            .map(|(_, h)| h.to_string())
            .collect();
        let mut columns: Vec<Vec<bool>> = vec![Vec::new(); names.len()];
        let mut labels = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let mut col = 0;
            for (j, cell) in record.iter().enumerate() {
                let bit = match cell {
                    "0" => false,
                    "1" => true,
                    _ if j == label_pos => {
                        return Err(Error::InvalidLabel {
                            row,
                            value: cell.to_string(),
                        })
                    }
                    _ => {
                        return Err(Error::TypeMismatch {
                            column: headers[j].to_string(),
                            row,
                            value: cell.to_string(),
                        })
                    }
                };
                if j == label_pos {
                    labels.push(bit);
                } else {
                    columns[col].push(bit);
                    col += 1;
                }
            }
        }
        let features = columns.iter().map(|c| BitMask::from_bools(c)).collect();
        BinaryDataset::new(features, BitMask::from_bools(&labels), names)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut ds = BinaryDataset::read_csv(std::io::BufReader::new(file))?;
        ds.provenance.source = Some(path.display().to_string());
        Ok(ds)
    }
}
