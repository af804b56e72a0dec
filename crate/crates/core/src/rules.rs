//! Antecedents, prefixes and equivalence groups, all evaluated with bit masks.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::bitmask::BitMask;
use crate::data::BinaryDataset;
use crate::error::{Error, Result};

/// A feature test: `feature == 1` when positive, `feature == 0` when negated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub feature: usize,
    pub negated: bool,
}

impl Literal {
    pub fn pos(feature: usize) -> Self {
        Literal {
            feature,
            negated: false,
        }
    }

    pub fn neg(feature: usize) -> Self {
        Literal {
            feature,
            negated: true,
        }
    }

    #[inline]
    pub fn holds(&self, x: &[bool]) -> bool {
        x[self.feature] != self.negated
    }
}

/// Conjunction of at most two literals over distinct features. The empty
/// conjunction is the always-true antecedent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Antecedent {
    literals: Vec<Literal>,
}

pub const MAX_CARDINALITY: usize = 2;

impl Antecedent {
    pub fn always_true() -> Self {
        Antecedent { literals: Vec::new() }
    }

    pub fn new(mut literals: Vec<Literal>) -> Result<Self> {
        if literals.is_empty() || literals.len() > MAX_CARDINALITY {
            return Err(Error::Data(format!(
                "antecedent must have 1..={MAX_CARDINALITY} literals, got {}",
                literals.len()
            )));
        }
        literals.sort();
        if literals.windows(2).any(|w| w[0].feature == w[1].feature) {
            return Err(Error::Data("antecedent repeats a feature".into()));
        }
        Ok(Antecedent { literals })
    }

    pub fn single(lit: Literal) -> Self {
        Antecedent { literals: vec![lit] }
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn is_always_true(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn matches(&self, x: &[bool]) -> bool {
        self.literals.iter().all(|l| l.holds(x))
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        match self.literals.iter().find(|l| l.feature >= n_features) {
            Some(l) => Err(Error::FeatureOutOfRange {
                index: l.feature,
                n_features,
            }),
            None => Ok(()),
        }
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        AntecedentDisplay { a: self, names }
    }
}

struct AntecedentDisplay<'a> {
    a: &'a Antecedent,
    names: &'a [String],
}

impl fmt::Display for AntecedentDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.a.is_always_true() {
            return write!(f, "true");
        }
        for (i, l) in self.a.literals.iter().enumerate() {
            if i > 0 {
                write!(f, " && ")?;
            }
            let name = self.names.get(l.feature).map_or("?", String::as_str);
            if l.negated {
                write!(f, "!({name})")?;
            } else {
                write!(f, "{name}")?;
            }
        }
        Ok(())
    }
}

pub fn capture(a: &Antecedent, data: &BinaryDataset) -> Result<BitMask> {
    a.validate(data.n_features())?;
    Ok(capture_unchecked(a, data))
}

pub(crate) fn capture_unchecked(a: &Antecedent, data: &BinaryDataset) -> BitMask {
    let mut mask = BitMask::ones(data.n_rows());
    for l in &a.literals {
        if l.negated {
            mask.and_not_assign(data.feature(l.feature));
        } else {
            mask.and_assign(data.feature(l.feature));
        }
    }
    mask
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub antecedent: Antecedent,
    pub consequent: bool,
}

/// Majority label of `ones` positives among `n`; ties go to `tie`.
#[inline]
pub fn majority(ones: usize, n: usize, tie: bool) -> bool {
    match (2 * ones).cmp(&n) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => tie,
    }
}

/// Errors made by predicting `label` on `ones` positives out of `n`.
#[inline]
pub fn errors_for(label: bool, ones: usize, n: usize) -> usize {
    if label {
        n - ones
    } else {
        ones
    }
}

/// Ordered rule list without a default prediction, with caches over the
/// training set it was built on.
#[derive(Debug, Clone, PartialEq)]
pub struct Prefix {
    rules: Vec<Rule>,
    /// Examples first matched by each rule.
    rule_masks: Vec<BitMask>,
    rule_errors: Vec<usize>,
    captured: BitMask,
    errors: usize,
    /// Newly captured count of the last appended rule.
    last_new: usize,
}

impl Prefix {
    pub fn empty(data: &BinaryDataset) -> Self {
        Prefix {
            rules: Vec::new(),
            rule_masks: Vec::new(),
            rule_errors: Vec::new(),
            captured: BitMask::zeros(data.n_rows()),
            errors: 0,
            last_new: 0,
        }
    }

    /// `[(true -> majority)]`, feasible for every transparency constraint.
    pub fn majority(data: &BinaryDataset) -> Self {
        Prefix::empty(data).extend(&Antecedent::always_true(), data)
    }

    /// Builds a prefix from antecedents, setting each consequent by majority.
    pub fn from_antecedents<'a>(
        antecedents: impl IntoIterator<Item = &'a Antecedent>,
        data: &BinaryDataset,
    ) -> Result<Self> {
        let mut p = Prefix::empty(data);
        for a in antecedents {
            a.validate(data.n_features())?;
            p = p.extend(a, data);
        }
        Ok(p)
    }

    /// Builds a prefix with fixed consequents (e.g. loaded from a model file).
    pub fn from_rules(rules: &[Rule], data: &BinaryDataset) -> Result<Self> {
        let mut p = Prefix::empty(data);
        for r in rules {
            r.antecedent.validate(data.n_features())?;
            p.push(r.antecedent.clone(), Some(r.consequent), data);
        }
        Ok(p)
    }

    /// Appends `a` with the consequent minimizing error on the newly captured
    /// examples (ties take the training majority label).
    pub fn extend(&self, a: &Antecedent, data: &BinaryDataset) -> Prefix {
        let mut p = self.clone();
        p.push(a.clone(), None, data);
        p
    }

    fn push(&mut self, a: Antecedent, consequent: Option<bool>, data: &BinaryDataset) {
        let mut newly = capture_unchecked(&a, data);
        newly.and_not_assign(&self.captured);
        let n = newly.count();
        let ones = newly.count_and(data.labels());
        let q = consequent.unwrap_or_else(|| majority(ones, n, data.majority_label()));
        let err = errors_for(q, ones, n);
        self.captured.or_assign(&newly);
        self.errors += err;
        self.rule_errors.push(err);
        self.rule_masks.push(newly);
        self.last_new = n;
        self.rules.push(Rule {
            antecedent: a,
            consequent: q,
        });
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Capture set `S_p` over the training set.
    pub fn captured(&self) -> &BitMask {
        &self.captured
    }

    pub fn n_captured(&self) -> usize {
        self.captured.count()
    }

    /// `err(p, S_p)`
    pub fn errors(&self) -> usize {
        self.errors
    }

    pub fn rule_masks(&self) -> &[BitMask] {
        &self.rule_masks
    }

    pub fn rule_errors(&self) -> &[usize] {
        &self.rule_errors
    }

    pub fn newly_captured_last(&self) -> usize {
        self.last_new
    }

    /// Index of the rule that fires first on training example `i`.
    pub fn rule_of(&self, i: usize) -> Option<usize> {
        self.rule_masks.iter().position(|m| m.get(i))
    }

    pub fn assign(&self, x: &[bool]) -> Assignment {
        assign(&self.rules, x)
    }

    pub fn coverage(&self) -> f64 {
        let m = self.captured.len();
        if m == 0 {
            0.0
        } else {
            self.n_captured() as f64 / m as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    pub captured: bool,
    pub label: Option<bool>,
    pub rule: Option<usize>,
}

/// First-match evaluation of a rule list on a single feature vector.
pub fn assign(rules: &[Rule], x: &[bool]) -> Assignment {
    match rules.iter().position(|r| r.antecedent.matches(x)) {
        Some(i) => Assignment {
            captured: true,
            label: Some(rules[i].consequent),
            rule: Some(i),
        },
        None => Assignment {
            captured: false,
            label: None,
            rule: None,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub hash: u64,
    pub members: Vec<usize>,
    pub min: usize,
    pub maj: usize,
    pub minority_label: bool,
}

impl Group {
    pub fn size(&self) -> usize {
        self.min + self.maj
    }
}

/// Partition of the examples by identical feature vector.
#[derive(Debug, Clone)]
pub struct EquivGroups {
    groups: Vec<Group>,
    group_of: Vec<usize>,
    /// Members carrying their group's minority label; `popcount(mask & this)`
    /// is `incons(mask)` for any group-respecting mask.
    incons_mask: BitMask,
    total_incons: usize,
}

pub fn equiv_groups(data: &BinaryDataset) -> EquivGroups {
    let m = data.n_rows();
    let d = data.n_features();
    let words = d.div_ceil(64);
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut groups: Vec<Group> = Vec::new();
    let mut group_of = vec![0; m];
    let mut key = vec![0u64; words];
    for (i, slot) in group_of.iter_mut().enumerate() {
        key.iter_mut().for_each(|w| *w = 0);
        for j in 0..d {
            if data.feature(j).get(i) {
                key[j / 64] |= 1 << (j % 64);
            }
        }
        let g = *index.entry(key.clone()).or_insert_with(|| {
            let mut h = DefaultHasher::new();
            key.hash(&mut h);
            groups.push(Group {
                hash: h.finish(),
                members: Vec::new(),
                min: 0,
                maj: 0,
                minority_label: false,
            });
            groups.len() - 1
        });
        groups[g].members.push(i);
        *slot = g;
    }
    let mut incons_mask = BitMask::zeros(m);
    let mut total = 0;
    for g in &mut groups {
        let ones = g.members.iter().filter(|&&i| data.label(i)).count();
        let zeros = g.members.len() - ones;
        // ties: minority label 0
        g.minority_label = ones < zeros;
        g.min = ones.min(zeros);
        g.maj = ones.max(zeros);
        total += g.min;
        if g.min > 0 {
            for &i in &g.members {
                if data.label(i) == g.minority_label {
                    incons_mask.set(i, true);
                }
            }
        }
    }
    EquivGroups {
        groups,
        group_of,
        incons_mask,
        total_incons: total,
    }
}

impl EquivGroups {
    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn group_of(&self, i: usize) -> usize {
        self.group_of[i]
    }

    pub fn total_incons(&self) -> usize {
        self.total_incons
    }

    pub fn incons_mask(&self) -> &BitMask {
        &self.incons_mask
    }

    /// `incons(subset)`: Σ min_g over groups inside `subset`. Fails if the mask
    /// splits a group.
    pub fn incons_of(&self, subset: &BitMask) -> Result<usize> {
        let mut total = 0;
        for (gi, g) in self.groups.iter().enumerate() {
            let inside = g.members.iter().filter(|&&i| subset.get(i)).count();
            if inside == g.members.len() {
                total += g.min;
            } else if inside != 0 {
                return Err(Error::GroupSplit(gi));
            }
        }
        Ok(total)
    }
}
