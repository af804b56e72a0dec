//! Loading, binarization, antecedent mining and splitting.

mod binarize;
mod dataset;
mod mine;
mod raw;
mod split;

pub use binarize::{apply_features, binarize, feature_name, DEFAULT_QUANTILES};
pub use dataset::{BinaryDataset, FeatureDef, Provenance};
pub use mine::{mine_antecedents, support_threshold, AntecedentPool, MiningParams, PoolEntry};
pub use raw::{load_raw, read_raw, ColumnData, ColumnKind, ColumnSpec, RawColumn, RawTable, Schema};
pub use split::{split, split_sizes, Splits};
