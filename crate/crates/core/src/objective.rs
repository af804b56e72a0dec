//! Objective functions and lower bounds for the four search modes.
//!
//! Error terms are kept as exact integer ratios; only the sparsity and
//! transparency regularizers are floating point. Two values compare equal
//! exactly when their error ratios, rule counts and uncaptured counts agree.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bitmask::BitMask;
use crate::data::{support_threshold, BinaryDataset};
use crate::error::{Error, Result};
use crate::rules::{errors_for, majority, EquivGroups, Prefix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Plain rule list: prefix plus a default prediction.
    Corels,
    /// Prefix wrapped around fixed black-box predictions.
    Post,
    /// Prefix trained first; uncaptured errors bounded by inconsistencies.
    Pre,
    /// Prefix trained first, scored only on its own capture set.
    PreNocollab,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Corels, Mode::Post, Mode::Pre, Mode::PreNocollab];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Corels => "corels",
            Mode::Post => "post",
            Mode::Pre => "pre",
            Mode::PreNocollab => "pre-nocollab",
        }
    }

    pub fn is_pre(&self) -> bool {
        matches!(self, Mode::Pre | Mode::PreNocollab)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub mode: Mode,
    pub lambda: f64,
    pub beta: f64,
    pub min_coverage: f64,
}

impl ObjectiveSpec {
    /// Spec with `beta` chosen by [`auto_beta`].
    pub fn with_auto_beta(mode: Mode, lambda: f64, min_coverage: f64, m: usize) -> Self {
        ObjectiveSpec {
            mode,
            lambda,
            beta: auto_beta(m, lambda),
            min_coverage,
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.min_coverage) {
            return Err(Error::Config(format!(
                "min coverage must lie in [0, 1], got {}",
                self.min_coverage
            )));
        }
        if self.beta.is_nan() || self.beta < 0.0 {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        if self.mode != Mode::Corels && m > 0 && self.beta >= 1.0 / m as f64 {
            return Err(Error::Config(format!(
                "beta {} must stay below 1/|S| = {}",
                self.beta,
                1.0 / m as f64
            )));
        }
        Ok(())
    }
}

/// `min(1/(2|S|), λ/2)`: small enough that transparency only breaks ties.
pub fn auto_beta(m: usize, lambda: f64) -> f64 {
    (1.0 / (2.0 * m as f64)).min(lambda / 2.0)
}

/// Objective (or bound) value with its components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    /// Error term numerator (an error count).
    pub err_num: u64,
    /// Error term denominator (`|S|`, or `|S_p|` for the no-collaboration mode).
    pub err_den: u64,
    /// Rule count charged by the sparsity term.
    pub rules: usize,
    pub lambda: f64,
    pub uncaptured: u64,
    pub n_examples: u64,
    pub beta: f64,
}

impl ObjectiveValue {
    pub fn error(&self) -> f64 {
        if self.err_den == 0 {
            0.0
        } else {
            self.err_num as f64 / self.err_den as f64
        }
    }

    pub fn sparsity(&self) -> f64 {
        self.lambda * self.rules as f64
    }

    pub fn transparency(&self) -> f64 {
        if self.n_examples == 0 {
            0.0
        } else {
            self.beta * self.uncaptured as f64 / self.n_examples as f64
        }
    }

    pub fn total(&self) -> f64 {
        self.error() + self.sparsity() + self.transparency()
    }

    /// Orders two values by total, resolving the error ratios exactly.
    pub fn compare(&self, other: &ObjectiveValue) -> Ordering {
        let lhs = self.err_num as u128 * other.err_den.max(1) as u128;
        let rhs = other.err_num as u128 * self.err_den.max(1) as u128;
        let same_unc = self.uncaptured as u128 * other.n_examples.max(1) as u128
            == other.uncaptured as u128 * self.n_examples.max(1) as u128;
        if lhs == rhs && self.rules == other.rules && same_unc {
            return Ordering::Equal;
        }
        let err_diff = if lhs == rhs {
            0.0
        } else {
            (lhs as f64 - rhs as f64) / (self.err_den.max(1) as f64 * other.err_den.max(1) as f64)
        };
        let diff = err_diff + (self.sparsity() - other.sparsity()) + (self.transparency() - other.transparency());
        if diff < 0.0 {
            Ordering::Less
        } else if diff > 0.0 {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    }

    pub fn lt(&self, other: &ObjectiveValue) -> bool {
        self.compare(other) == Ordering::Less
    }
}

/// Builds a value from raw counts: `num/den + λ·rules + β·uncaptured/m`.
pub(crate) fn value(num: usize, den: usize, rules: usize, lambda: f64, uncaptured: usize, m: usize, beta: f64) -> ObjectiveValue {
    ObjectiveValue {
        err_num: num as u64,
        err_den: den as u64,
        rules,
        lambda,
        uncaptured: uncaptured as u64,
        n_examples: m as u64,
        beta,
    }
}

/// Default label minimizing errors on the uncaptured examples; ties (including
/// an empty remainder) take the training majority.
pub fn default_prediction(p: &Prefix, data: &BinaryDataset) -> bool {
    let rest = p.captured().not();
    majority(rest.count_and(data.labels()), rest.count(), data.majority_label())
}

pub fn obj_corels(p: &Prefix, default: bool, data: &BinaryDataset, lambda: f64) -> ObjectiveValue {
    let m = data.n_rows();
    let unc = m - p.n_captured();
    let ones = data.labels().count_and_not(p.captured());
    let err = p.errors() + errors_for(default, ones, unc);
    value(err, m, p.len(), lambda, 0, m, 0.0)
}

pub fn lb_corels(p: &Prefix, groups: &EquivGroups, data: &BinaryDataset, lambda: f64) -> ObjectiveValue {
    let m = data.n_rows();
    let incons = groups.incons_mask().count_and_not(p.captured());
    value(p.errors() + incons, m, p.len() + 1, lambda, 0, m, 0.0)
}

pub fn obj_post(p: &Prefix, bb_preds: &BitMask, data: &BinaryDataset, lambda: f64, beta: f64) -> Result<ObjectiveValue> {
    let m = data.n_rows();
    if bb_preds.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            found: bb_preds.len(),
        });
    }
    let bb_wrong = bb_wrong_mask(bb_preds, data.labels());
    let bb_err = bb_wrong.count_and_not(p.captured());
    let unc = m - p.n_captured();
    Ok(value(p.errors() + bb_err, m, p.len(), lambda, unc, m, beta))
}

pub fn obj_pre(p: &Prefix, groups: &EquivGroups, data: &BinaryDataset, lambda: f64, beta: f64) -> ObjectiveValue {
    let m = data.n_rows();
    let incons = groups.incons_mask().count_and_not(p.captured());
    let unc = m - p.n_captured();
    value(p.errors() + incons, m, p.len(), lambda, unc, m, beta)
}

pub fn obj_pre_nocollab(p: &Prefix, data: &BinaryDataset, lambda: f64, beta: f64) -> Result<ObjectiveValue> {
    let m = data.n_rows();
    let n = p.n_captured();
    if n == 0 {
        return Err(Error::EmptyCapture);
    }
    Ok(value(p.errors(), n, p.len(), lambda, m - n, m, beta))
}

/// Lower bound on the no-collaboration objective of every strict extension.
///
/// The best rate an extension can reach is found by absorbing uncaptured
/// groups (each costing at least `min_g` errors) in increasing order of
/// `min_g / |g|` while the group's ratio does not exceed the running rate.
/// For a prefix capturing nothing this is the smallest group ratio.
pub fn lb_pre_nocollab(p: &Prefix, groups: &EquivGroups, data: &BinaryDataset, lambda: f64) -> Result<ObjectiveValue> {
    let m = data.n_rows();
    let n = p.n_captured();
    let mut candidates: Vec<(usize, usize)> = groups
        .groups()
        .iter()
        .filter(|g| !p.captured().get(g.members[0]))
        .map(|g| (g.min, g.size()))
        .collect();
    let (num, den) = absorb_groups(p.errors(), n, &mut candidates);
    Ok(value(num, den, p.len() + 1, lambda, 0, m, 0.0))
}

/// Greedy rate minimization over `(min_g, |g|)` candidates.
pub(crate) fn absorb_groups(mut num: usize, mut den: usize, candidates: &mut [(usize, usize)]) -> (usize, usize) {
    candidates.sort_by(|a, b| (a.0 * b.1).cmp(&(b.0 * a.1)));
    for &(min, size) in candidates.iter() {
        // min/size <= num/den
        if min * den <= num * size {
            num += min;
            den += size;
        } else {
            break;
        }
    }
    (num, den)
}

/// Post-mode lower bound. Each uncaptured group contributes the fewest errors
/// it can end up with: `min_g` if a later rule captures it, or the black box's
/// errors on it if it stays uncaptured. With a black box that is a function of
/// the binary features this equals [`lb_corels`].
pub fn lb_post(p: &Prefix, groups: &EquivGroups, bb_preds: &BitMask, data: &BinaryDataset, lambda: f64) -> Result<ObjectiveValue> {
    let m = data.n_rows();
    if bb_preds.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            found: bb_preds.len(),
        });
    }
    let floor = post_floor_mask(groups, bb_preds, data.labels());
    let f = floor.count_and_not(p.captured());
    Ok(value(p.errors() + f, m, p.len() + 1, lambda, 0, m, 0.0))
}

pub(crate) fn bb_wrong_mask(bb_preds: &BitMask, labels: &BitMask) -> BitMask {
    // xor
    bb_preds.and_not(labels).or(&labels.and_not(bb_preds))
}

pub(crate) fn post_floor_mask(groups: &EquivGroups, bb_preds: &BitMask, labels: &BitMask) -> BitMask {
    let wrong = bb_wrong_mask(bb_preds, labels);
    let mut floor = BitMask::zeros(labels.len());
    for g in groups.groups() {
        let bb_err = g.members.iter().filter(|&&i| wrong.get(i)).count();
        if bb_err < g.min {
            g.members.iter().filter(|&&i| wrong.get(i)).for_each(|&i| floor.set(i, true));
        } else if g.min > 0 {
            g.members
                .iter()
                .filter(|&&i| groups.incons_mask().get(i))
                .for_each(|&i| floor.set(i, true));
        }
    }
    floor
}

/// Minimum number of captured examples satisfying `|S_p| / |S| >= ψ`.
pub fn min_captured(min_coverage: f64, m: usize) -> usize {
    support_threshold(min_coverage, m)
}

pub fn check_transparency(p: &Prefix, data: &BinaryDataset, min_coverage: f64) -> bool {
    p.n_captured() >= min_captured(min_coverage, data.n_rows())
}

/// Mode objective of a prefix. `bb_preds` is required for [`Mode::Post`].
pub fn objective(
    spec: &ObjectiveSpec,
    p: &Prefix,
    groups: &EquivGroups,
    data: &BinaryDataset,
    bb_preds: Option<&BitMask>,
) -> Result<ObjectiveValue> {
    match spec.mode {
        Mode::Corels => Ok(obj_corels(p, default_prediction(p, data), data, spec.lambda)),
        Mode::Post => {
            let bb = bb_preds.ok_or_else(|| Error::Config("post mode needs black-box predictions".into()))?;
            obj_post(p, bb, data, spec.lambda, spec.beta)
        }
        Mode::Pre => Ok(obj_pre(p, groups, data, spec.lambda, spec.beta)),
        Mode::PreNocollab => obj_pre_nocollab(p, data, spec.lambda, spec.beta),
    }
}
