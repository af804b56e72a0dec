//! Hybrid rule-set / black-box models learned by branch-and-bound.
//!
//! A hybrid model is an ordered rule prefix followed by a black box. Examples
//! captured by a prefix rule are classified transparently; the rest fall
//! through to the black box.

pub mod bitmask;
pub mod blackbox;
pub mod data;
pub mod error;
pub mod harness;
pub mod model;
pub mod objective;
pub mod rules;
pub mod search;
pub mod theory;

pub use bitmask::BitMask;
pub use data::{AntecedentPool, BinaryDataset, MiningParams};
pub use error::{Error, ErrorKind, Result};
pub use objective::{Mode, ObjectiveSpec, ObjectiveValue};
pub use rules::{Antecedent, EquivGroups, Literal, Prefix, Rule};
pub use search::{optimize, Policy, SearchConfig, SearchResult, Status};
