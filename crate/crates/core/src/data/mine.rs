use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bitmask::BitMask;
use crate::data::BinaryDataset;
use crate::error::{Error, Result};
use crate::rules::{Antecedent, Literal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningParams {
    pub max_card: usize,
    pub min_support: f64,
    pub top_k: usize,
    pub add_negations: bool,
}

impl Default for MiningParams {
    fn default() -> Self {
        MiningParams {
            max_card: 2,
            min_support: 0.01,
            top_k: 300,
            add_negations: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub antecedent: Antecedent,
    pub support: usize,
    /// Another entry earlier in the pool has the same capture mask.
    pub duplicate_capture: bool,
}

/// Pre-mined candidate antecedents, sorted by support (descending).
#[derive(Debug, Clone, PartialEq)]
pub struct AntecedentPool {
    pub entries: Vec<PoolEntry>,
    pub params: MiningParams,
}

/// `ceil(frac * m)` computed without float drift for exact products.
pub fn support_threshold(frac: f64, m: usize) -> usize {
    let x = frac * m as f64;
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        x.ceil() as usize
    }
}

fn literal_mask(data: &BinaryDataset, l: Literal) -> BitMask {
    if l.negated {
        data.feature(l.feature).not()
    } else {
        data.feature(l.feature).clone()
    }
}

/// Enumerates single literals and pairs of literals by direct counting and
/// keeps the `top_k` with the largest support.
pub fn mine_antecedents(data: &BinaryDataset, params: &MiningParams) -> Result<AntecedentPool> {
    if !(params.min_support > 0.0 && params.min_support < 1.0) {
        return Err(Error::Config(format!(
            "min_support must lie in (0, 1), got {}",
            params.min_support
        )));
    }
    if params.top_k == 0 {
        return Err(Error::Config("top_k must be >= 1".into()));
    }
    if !(1..=2).contains(&params.max_card) {
        return Err(Error::Config(format!("max_card must be 1 or 2, got {}", params.max_card)));
    }
    let threshold = support_threshold(params.min_support, data.n_rows()).max(1);

    let mut literals: Vec<Literal> = (0..data.n_features()).map(Literal::pos).collect();
    if params.add_negations {
        literals.extend((0..data.n_features()).map(Literal::neg));
    }
    literals.sort();
    let masks: Vec<BitMask> = literals.iter().map(|&l| literal_mask(data, l)).collect();

    let mut found: Vec<(Antecedent, usize)> = Vec::new();
    for (l, m) in literals.iter().zip(&masks) {
        let s = m.count();
        if s >= threshold {
            found.push((Antecedent::single(*l), s));
        }
    }
    if params.max_card == 2 {
        for i in 0..literals.len() {
            for j in i + 1..literals.len() {
                if literals[i].feature == literals[j].feature {
                    continue;
                }
                let s = masks[i].count_and(&masks[j]);
                if s >= threshold {
                    found.push((Antecedent::new(vec![literals[i], literals[j]])?, s));
                }
            }
        }
    }
    if found.is_empty() {
        return Err(Error::EmptyPool(threshold));
    }

    let key = |a: &Antecedent| -> (Vec<usize>, Vec<bool>) {
        (
            a.literals().iter().map(|l| l.feature).collect(),
            a.literals().iter().map(|l| l.negated).collect(),
        )
    };
    found.sort_by(|(a, sa), (b, sb)| sb.cmp(sa).then_with(|| key(a).cmp(&key(b))));
    found.truncate(params.top_k);

    let mut seen: HashMap<BitMask, usize> = HashMap::new();
    let entries = found
        .into_iter()
        .enumerate()
        .map(|(i, (antecedent, support))| {
            let mask = crate::rules::capture_unchecked(&antecedent, data);
            let duplicate_capture = *seen.entry(mask).or_insert(i) != i;
            PoolEntry {
                antecedent,
                support,
                duplicate_capture,
            }
        })
        .collect();
    Ok(AntecedentPool {
        entries,
        params: params.clone(),
    })
}

#[derive(Serialize, Deserialize)]
struct PoolEntryJson {
    /// `(feature name, positive)` pairs
    literals: Vec<(String, bool)>,
    support: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    duplicate_capture: bool,
}

impl AntecedentPool {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn antecedents(&self) -> impl Iterator<Item = &Antecedent> {
        self.entries.iter().map(|e| &e.antecedent)
    }

    pub fn to_json(&self, names: &[String]) -> Result<String> {
        let rows: Vec<PoolEntryJson> = self
            .entries
            .iter()
            .map(|e| PoolEntryJson {
                literals: e
                    .antecedent
                    .literals()
                    .iter()
                    .map(|l| (names[l.feature].clone(), !l.negated))
                    .collect(),
                support: e.support,
                duplicate_capture: e.duplicate_capture,
            })
            .collect();
        Ok(serde_json::to_string_pretty(&rows)?)
    }

    /// Parses a pool file, resolving feature names against `data`. Mining
    /// parameters are not part of the file and come back as defaults.
    pub fn from_json(text: &str, data: &BinaryDataset) -> Result<Self> {
        let rows: Vec<PoolEntryJson> = serde_json::from_str(text)?;
        let entries = rows
            .into_iter()
            .map(|r| {
                let lits = r
                    .literals
                    .iter()
                    .map(|(name, positive)| {
                        data.feature_index(name)
                            .map(|f| Literal {
                                feature: f,
                                negated: !positive,
                            })
                            .ok_or_else(|| Error::Data(format!("unknown feature {name:?} in pool")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(PoolEntry {
                    antecedent: Antecedent::new(lits)?,
                    support: r.support,
                    duplicate_capture: r.duplicate_capture,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AntecedentPool {
            entries,
            params: MiningParams::default(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>, names: &[String]) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json(names)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, data: &BinaryDataset) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        AntecedentPool::from_json(&text, data)
    }
}
