use std::collections::BTreeSet;

use log::warn;

use crate::bitmask::BitMask;
use crate::data::dataset::{BinaryDataset, FeatureDef, Provenance};
use crate::data::raw::{ColumnData, RawTable};
use crate::error::{Error, Result};

/// Default number of quantile bins per numeric column.
pub const DEFAULT_QUANTILES: usize = 4;

/// Binarizes a raw table: numeric columns become `col<=t` threshold features at
/// the empirical `i/q` quantiles, categorical columns become one indicator per
/// level. Numeric columns holding only 0/1 values are passed through unchanged.
pub fn binarize(table: &RawTable, q: usize) -> Result<BinaryDataset> {
    if q < 2 {
        return Err(Error::Config(format!("quantile count must be >= 2, got {q}")));
    }
    let mut defs = Vec::new();
    for col in &table.columns {
        match &col.data {
            ColumnData::Numeric(values) => defs.extend(numeric_features(&col.name, values, q)),
            ColumnData::Categorical(values) => {
                let levels: BTreeSet<&str> = values.iter().map(String::as_str).collect();
                if levels.len() < 2 {
                    return Err(Error::Data(format!(
                        "categorical column {:?} has fewer than 2 observed levels",
                        col.name
                    )));
                }
                defs.extend(levels.into_iter().map(|level| FeatureDef::Level {
                    column: col.name.clone(),
                    level: level.to_string(),
                }));
            }
        }
    }
    let mut ds = apply_features(table, &defs)?;
    ds.provenance = Provenance {
        source: table.source.clone(),
        quantiles: Some(q),
        features: defs,
    };
    Ok(ds)
}

fn numeric_features(name: &str, values: &[f64], q: usize) -> Vec<FeatureDef> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    if min == max {
        warn!("numeric column {name:?} is constant; no feature emitted");
        return Vec::new();
    }
    if sorted.iter().all(|&v| v == 0.0 || v == 1.0) {
        return vec![FeatureDef::Passthrough {
            column: name.to_string(),
        }];
    }
    let n = sorted.len();
    let mut thresholds: Vec<f64> = Vec::new();
    for i in 1..q {
        let k = i * n / q;
        if k == 0 || k >= n {
            continue;
        }
        let t = 0.5 * (sorted[k - 1] + sorted[k]);
        if t >= max {
            // `col <= max` holds everywhere
            continue;
        }
        if thresholds.contains(&t) {
            warn!("numeric column {name:?}: duplicate quantile threshold {t} dropped");
            continue;
        }
        thresholds.push(t);
    }
    thresholds
        .into_iter()
        .map(|threshold| FeatureDef::Threshold {
            column: name.to_string(),
            threshold,
        })
        .collect()
}

pub fn feature_name(def: &FeatureDef) -> String {
    match def {
        FeatureDef::Threshold { column, threshold } => format!("{column}<={threshold}"),
        FeatureDef::Level { column, level } => format!("{column}={level}"),
        FeatureDef::Passthrough { column } => column.clone(),
    }
}

/// Evaluates previously derived feature definitions on a (possibly new) table.
pub fn apply_features(table: &RawTable, defs: &[FeatureDef]) -> Result<BinaryDataset> {
    let m = table.n_rows();
    let mut features = Vec::with_capacity(defs.len());
    for def in defs {
        let column = match def {
            FeatureDef::Threshold { column, .. }
            | FeatureDef::Level { column, .. }
            | FeatureDef::Passthrough { column } => column,
        };
        let col = table
            .column(column)
            .ok_or_else(|| Error::MissingColumn(column.clone()))?;
        let bits: Vec<bool> = match (def, &col.data) {
            (FeatureDef::Threshold { threshold, .. }, ColumnData::Numeric(v)) => {
                v.iter().map(|&x| x <= *threshold).collect()
            }
            (FeatureDef::Passthrough { .. }, ColumnData::Numeric(v)) => v.iter().map(|&x| x == 1.0).collect(),
            (FeatureDef::Level { level, .. }, ColumnData::Categorical(v)) => v.iter().map(|x| x == level).collect(),
            _ => {
                return Err(Error::Data(format!(
                    "feature definition does not match the type of column {column:?}"
                )))
            }
        };
        debug_assert_eq!(bits.len(), m);
        features.push(BitMask::from_bools(&bits));
    }
    let names = defs.iter().map(feature_name).collect();
    BinaryDataset::new(features, BitMask::from_bools(&table.labels), names)
}
