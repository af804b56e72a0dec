//! Branch-and-bound over the prefix tree.
//!
//! Each queue node stores only its antecedent ids and a few counters; the
//! capture mask is rebuilt from the pool when the node is popped. Children are
//! scored as they are generated: the objective is evaluated (and the incumbent
//! updated) before the lower bound decides whether the child is enqueued.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::str::FromStr;
use std::time::{Duration, Instant};

use log::info;
use serde::{Deserialize, Serialize};

use crate::bitmask::BitMask;
use crate::data::{support_threshold, AntecedentPool, BinaryDataset};
use crate::error::{Error, Result};
use crate::objective::{
    bb_wrong_mask, min_captured, objective, post_floor_mask, value, Mode, ObjectiveSpec, ObjectiveValue,
};
use crate::rules::{capture_unchecked, errors_for, majority, Antecedent, EquivGroups, Prefix, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Bfs,
    ObjectiveGuided,
    LowerBoundGuided,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Bfs, Policy::ObjectiveGuided, Policy::LowerBoundGuided];

    pub fn as_str(&self) -> &'static str {
        match self {
            Policy::Bfs => "bfs",
            Policy::ObjectiveGuided => "objective-guided",
            Policy::LowerBoundGuided => "lower-bound-guided",
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bfs" => Ok(Policy::Bfs),
            "objective" | "objective-guided" => Ok(Policy::ObjectiveGuided),
            "lower-bound" | "lower-bound-guided" | "lb" => Ok(Policy::LowerBoundGuided),
            _ => Err(Error::Config(format!("unknown policy {s:?}"))),
        }
    }
}

/// What the search-time minimum support is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportSemantics {
    /// Examples newly captured by the appended rule.
    NewlyCaptured,
    /// The antecedent's support on the whole training set.
    RawSupport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub objective: ObjectiveSpec,
    pub policy: Policy,
    pub min_support: f64,
    pub support_semantics: SupportSemantics,
    pub max_length: usize,
    pub time_limit: Option<Duration>,
    pub memory_limit: Option<usize>,
    pub use_permutation_map: bool,
    /// Incumbent to start from; `None` uses `[(true -> majority)]`.
    pub initial_prefix: Option<Vec<Rule>>,
}

pub const DEFAULT_MAX_LENGTH: usize = 10;

impl SearchConfig {
    pub fn new(objective: ObjectiveSpec) -> Self {
        SearchConfig {
            objective,
            policy: Policy::LowerBoundGuided,
            min_support: 0.0,
            support_semantics: SupportSemantics::NewlyCaptured,
            max_length: DEFAULT_MAX_LENGTH,
            time_limit: None,
            memory_limit: None,
            use_permutation_map: true,
            initial_prefix: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    TimeLimit,
    MemoryLimit,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::TimeLimit => "time-limit",
            Status::MemoryLimit => "memory-limit",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub nodes_explored: u64,
    pub nodes_evaluated: u64,
    pub pruned_bound: u64,
    pub pruned_permutation: u64,
    pub pruned_support: u64,
    pub peak_queue: usize,
    pub wall_time_secs: f64,
}

/// One incumbent improvement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressEntry {
    pub elapsed_secs: f64,
    pub objective: ObjectiveValue,
    pub coverage: f64,
    pub length: usize,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub prefix: Prefix,
    pub objective: ObjectiveValue,
    pub status: Status,
    pub stats: SearchStats,
    pub progress: Vec<ProgressEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Filter {
    Keep,
    Drop,
}

/// Drops extensions capturing fewer than `ceil(frac * m)` new examples, and
/// always drops extensions capturing nothing new.
pub fn support_prune(newly_captured: usize, m: usize, min_support: f64) -> Filter {
    if newly_captured == 0 || newly_captured < support_threshold(min_support, m) {
        Filter::Drop
    } else {
        Filter::Keep
    }
}

/// Keeps only the most accurate ordering of each antecedent set.
#[derive(Debug, Default)]
pub struct PermutationMap {
    best: HashMap<Vec<u32>, usize>,
}

impl PermutationMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.best.len()
    }

    pub fn is_empty(&self) -> bool {
        self.best.is_empty()
    }

    fn key(ids: &[u32]) -> Vec<u32> {
        let mut k = ids.to_vec();
        k.sort_unstable();
        k
    }

    /// Ties drop the newcomer.
    pub fn filter(&mut self, ids: &[u32], errors: usize) -> Filter {
        let key = Self::key(ids);
        match self.best.get_mut(&key) {
            Some(stored) if *stored <= errors => Filter::Drop,
            Some(stored) => {
                *stored = errors;
                Filter::Keep
            }
            None => {
                self.best.insert(key, errors);
                Filter::Keep
            }
        }
    }

    /// A queued node was superseded by a more accurate permutation.
    fn is_stale(&self, ids: &[u32], errors: usize) -> bool {
        self.best.get(&Self::key(ids)).is_some_and(|&e| e < errors)
    }

    fn approx_bytes(&self) -> usize {
        self.best.keys().map(|k| k.capacity() * 4 + 48).sum()
    }
}

#[derive(Debug, Clone)]
pub struct SearchNode {
    pub ids: Vec<u32>,
    pub errors: usize,
    pub n_captured: usize,
    pub lower_bound: ObjectiveValue,
    pub objective: Option<ObjectiveValue>,
    pub seq: u64,
}

/// Smaller keys are popped first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorityKey {
    pub primary: f64,
    pub seq: u64,
}

impl PriorityKey {
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.primary.total_cmp(&other.primary).then(self.seq.cmp(&other.seq))
    }
}

pub fn priority_key(node: &SearchNode, policy: Policy) -> PriorityKey {
    let primary = match policy {
        Policy::Bfs => node.ids.len() as f64,
        Policy::LowerBoundGuided => node.lower_bound.total(),
        Policy::ObjectiveGuided => node.objective.map_or(f64::INFINITY, |o| o.total()),
    };
    PriorityKey { primary, seq: node.seq }
}

/// Returns the halting status when a limit has been reached.
pub fn anytime_check(start: Instant, memory_bytes: usize, cfg: &SearchConfig) -> Option<Status> {
    if cfg.time_limit.is_some_and(|t| start.elapsed() >= t) {
        return Some(Status::TimeLimit);
    }
    if cfg.memory_limit.is_some_and(|m| memory_bytes > m) {
        return Some(Status::MemoryLimit);
    }
    None
}

struct QueueEntry {
    key: PriorityKey,
    node: SearchNode,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    // BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.cmp_key(&self.key)
    }
}

fn node_bytes(node: &SearchNode) -> usize {
    std::mem::size_of::<QueueEntry>() + node.ids.capacity() * 4
}

/// Aggregates over the uncaptured examples of a node.
#[derive(Debug, Clone, Copy, Default)]
struct Remainder {
    positives: usize,
    incons: usize,
    bb_wrong: usize,
    floor: usize,
    consistent: usize,
}

struct Engine<'a> {
    spec: ObjectiveSpec,
    m: usize,
    labels: &'a BitMask,
    caps: Vec<BitMask>,
    supports: Vec<usize>,
    incons: &'a BitMask,
    bb_wrong: Option<BitMask>,
    floor: Option<BitMask>,
    /// Members of groups with `min_g == 0`.
    consistent: BitMask,
    /// `(representative, min_g, |g|)` of inconsistent groups, by increasing ratio.
    incons_groups: Vec<(usize, usize, usize)>,
    tie_label: bool,
    support_min: usize,
}

impl<'a> Engine<'a> {
    fn remainder(&self, uncaptured: &BitMask) -> Remainder {
        Remainder {
            positives: uncaptured.count_and(self.labels),
            incons: uncaptured.count_and(self.incons),
            bb_wrong: self.bb_wrong.as_ref().map_or(0, |b| uncaptured.count_and(b)),
            floor: self.floor.as_ref().map_or(0, |b| uncaptured.count_and(b)),
            consistent: uncaptured.count_and(&self.consistent),
        }
    }

    fn objective(&self, errors: usize, n: usize, k: usize, rest: &Remainder) -> Option<ObjectiveValue> {
        let (m, lambda, beta) = (self.m, self.spec.lambda, self.spec.beta);
        let unc = m - n;
        Some(match self.spec.mode {
            Mode::Corels => {
                let default = majority(rest.positives, unc, self.tie_label);
                value(errors + errors_for(default, rest.positives, unc), m, k, lambda, 0, m, 0.0)
            }
            Mode::Post => value(errors + rest.bb_wrong, m, k, lambda, unc, m, beta),
            Mode::Pre => value(errors + rest.incons, m, k, lambda, unc, m, beta),
            Mode::PreNocollab => {
                if n == 0 {
                    return None;
                }
                value(errors, n, k, lambda, unc, m, beta)
            }
        })
    }

    fn lower_bound(&self, errors: usize, n: usize, k: usize, rest: &Remainder, captured: &dyn Fn(usize) -> bool) -> ObjectiveValue {
        let (m, lambda) = (self.m, self.spec.lambda);
        match self.spec.mode {
            Mode::Corels | Mode::Pre => value(errors + rest.incons, m, k + 1, lambda, 0, m, 0.0),
            Mode::Post => value(errors + rest.floor, m, k + 1, lambda, 0, m, 0.0),
            Mode::PreNocollab => {
                if n == 0 {
                    return value(0, 1, k + 1, lambda, 0, m, 0.0);
                }
                let (mut num, mut den) = (errors, n + rest.consistent);
                for &(rep, min, size) in &self.incons_groups {
                    if captured(rep) {
                        continue;
                    }
                    if min * den <= num * size {
                        num += min;
                        den += size;
                    } else {
                        break;
                    }
                }
                value(num, den, k + 1, lambda, 0, m, 0.0)
            }
        }
    }
}

struct Incumbent {
    ids: Option<Vec<u32>>,
    value: ObjectiveValue,
}

pub fn optimize(
    data: &BinaryDataset,
    pool: &AntecedentPool,
    groups: &EquivGroups,
    bb_preds: Option<&BitMask>,
    cfg: &SearchConfig,
) -> Result<SearchResult> {
    let start = Instant::now();
    let m = data.n_rows();
    let spec = cfg.objective;
    spec.validate(m)?;
    if cfg.max_length == 0 {
        return Err(Error::Config("max prefix length must be >= 1".into()));
    }
    if !(0.0..1.0).contains(&cfg.min_support) {
        return Err(Error::Config(format!("min support must lie in [0, 1), got {}", cfg.min_support)));
    }
    if pool.len() > u32::MAX as usize {
        return Err(Error::Config("antecedent pool too large".into()));
    }
    if spec.mode == Mode::Post {
        match bb_preds {
            None => return Err(Error::Config("post mode needs black-box training predictions".into())),
            Some(b) if b.len() != m => {
                return Err(Error::LengthMismatch {
                    expected: m,
                    found: b.len(),
                })
            }
            _ => {}
        }
    }
    let min_cap = min_captured(spec.min_coverage, m);

    let initial = match &cfg.initial_prefix {
        Some(rules) => Prefix::from_rules(rules, data)?,
        None => Prefix::majority(data),
    };
    if initial.n_captured() < min_cap {
        return Err(Error::Config(format!(
            "initial prefix captures {} examples, below the required {min_cap}",
            initial.n_captured()
        )));
    }
    let initial_value = objective(&spec, &initial, groups, data, bb_preds)?;

    let mut consistent = BitMask::zeros(m);
    let mut incons_groups = Vec::new();
    for g in groups.groups() {
        if g.min == 0 {
            g.members.iter().for_each(|&i| consistent.set(i, true));
        } else {
            incons_groups.push((g.members[0], g.min, g.size()));
        }
    }
    incons_groups.sort_by(|a, b| (a.1 * b.2).cmp(&(b.1 * a.2)).then(a.0.cmp(&b.0)));

    let caps: Vec<BitMask> = pool.antecedents().map(|a| capture_unchecked(a, data)).collect();
    let engine = Engine {
        spec,
        m,
        labels: data.labels(),
        supports: caps.iter().map(BitMask::count).collect(),
        caps,
        incons: groups.incons_mask(),
        bb_wrong: bb_preds.map(|b| bb_wrong_mask(b, data.labels())),
        floor: bb_preds.map(|b| post_floor_mask(groups, b, data.labels())),
        consistent,
        incons_groups,
        tie_label: data.majority_label(),
        support_min: support_threshold(cfg.min_support, m),
    };

    let mut stats = SearchStats::default();
    let mut progress = Vec::new();
    let mut best = Incumbent {
        ids: None,
        value: initial_value,
    };
    let record = |best: &mut Incumbent, ids: Vec<u32>, v: ObjectiveValue, n: usize, progress: &mut Vec<ProgressEntry>| {
        let entry = ProgressEntry {
            elapsed_secs: start.elapsed().as_secs_f64(),
            objective: v,
            coverage: n as f64 / m as f64,
            length: ids.len(),
        };
        info!(
            "[{:.3}s] objective {:.6} (error {:.6}, sparsity {:.6}, transparency {:.6}) coverage {:.4} length {}",
            entry.elapsed_secs,
            v.total(),
            v.error(),
            v.sparsity(),
            v.transparency(),
            entry.coverage,
            entry.length
        );
        progress.push(entry);
        *best = Incumbent { ids: Some(ids), value: v };
    };

    // root: the empty prefix
    let root_rest = engine.remainder(&BitMask::ones(m));
    stats.nodes_evaluated += 1;
    if let Some(v) = engine.objective(0, 0, 0, &root_rest) {
        if min_cap == 0 && v.lt(&best.value) {
            record(&mut best, Vec::new(), v, 0, &mut progress);
        }
    }
    let root = SearchNode {
        ids: Vec::new(),
        errors: 0,
        n_captured: 0,
        lower_bound: engine.lower_bound(0, 0, 0, &root_rest, &|_| false),
        objective: engine.objective(0, 0, 0, &root_rest),
        seq: 0,
    };
    let mut seq = 1u64;
    let mut queue = BinaryHeap::new();
    let mut queue_bytes = 0usize;
    let mut perm = PermutationMap::new();
    if root.lower_bound.lt(&best.value) {
        queue_bytes += node_bytes(&root);
        queue.push(QueueEntry {
            key: priority_key(&root, cfg.policy),
            node: root,
        });
    }

    let mut status = Status::Optimal;
    let mut newly = BitMask::zeros(m);
    'search: while let Some(QueueEntry { node, .. }) = queue.pop() {
        queue_bytes -= node_bytes(&node);
        if let Some(s) = anytime_check(start, queue_bytes + perm.approx_bytes(), cfg) {
            status = s;
            break;
        }
        if !node.lower_bound.lt(&best.value) {
            stats.pruned_bound += 1;
            continue;
        }
        if cfg.use_permutation_map && perm.is_stale(&node.ids, node.errors) {
            stats.pruned_permutation += 1;
            continue;
        }
        stats.nodes_explored += 1;

        let mut captured = BitMask::zeros(m);
        for &id in &node.ids {
            captured.or_assign(&engine.caps[id as usize]);
        }
        let rest = engine.remainder(&captured.not());
        let k = node.ids.len() + 1;

        for (a, cap) in engine.caps.iter().enumerate() {
            if node.ids.contains(&(a as u32)) {
                continue;
            }
            newly.clone_from(cap);
            newly.and_not_assign(&captured);
            let nn = newly.count();
            let keep = match cfg.support_semantics {
                SupportSemantics::NewlyCaptured => support_prune(nn, m, cfg.min_support),
                SupportSemantics::RawSupport if nn == 0 || engine.supports[a] < engine.support_min => Filter::Drop,
                SupportSemantics::RawSupport => Filter::Keep,
            };
            if keep == Filter::Drop {
                stats.pruned_support += 1;
                continue;
            }
            let ones = newly.count_and(engine.labels);
            let q = majority(ones, nn, engine.tie_label);
            let errors = node.errors + errors_for(q, ones, nn);
            let n = node.n_captured + nn;
            let child_rest = Remainder {
                positives: rest.positives - ones,
                incons: rest.incons - newly.count_and(engine.incons),
                bb_wrong: engine.bb_wrong.as_ref().map_or(0, |b| rest.bb_wrong - newly.count_and(b)),
                floor: engine.floor.as_ref().map_or(0, |b| rest.floor - newly.count_and(b)),
                consistent: rest.consistent - newly.count_and(&engine.consistent),
            };
            stats.nodes_evaluated += 1;
            let obj = engine.objective(errors, n, k, &child_rest);
            if let Some(v) = obj {
                if n >= min_cap && v.lt(&best.value) {
                    let mut ids = node.ids.clone();
                    ids.push(a as u32);
                    record(&mut best, ids, v, n, &mut progress);
                }
            }
            if k >= cfg.max_length {
                continue;
            }
            let lb = engine.lower_bound(errors, n, k, &child_rest, &|i| captured.get(i) || cap.get(i));
            if !lb.lt(&best.value) {
                stats.pruned_bound += 1;
                continue;
            }
            let mut ids = Vec::with_capacity(k);
            ids.extend_from_slice(&node.ids);
            ids.push(a as u32);
            if cfg.use_permutation_map && perm.filter(&ids, errors) == Filter::Drop {
                stats.pruned_permutation += 1;
                continue;
            }
            let child = SearchNode {
                ids,
                errors,
                n_captured: n,
                lower_bound: lb,
                objective: obj,
                seq,
            };
            seq += 1;
            let bytes = node_bytes(&child);
            if let Some(s) = anytime_check(start, queue_bytes + bytes + perm.approx_bytes(), cfg) {
                status = s;
                break 'search;
            }
            queue_bytes += bytes;
            queue.push(QueueEntry {
                key: priority_key(&child, cfg.policy),
                node: child,
            });
        }
        stats.peak_queue = stats.peak_queue.max(queue.len());
    }
    if status == Status::Optimal && !queue.is_empty() {
        // a limit tripped with work left
        status = Status::TimeLimit;
    }

    let prefix = match &best.ids {
        None => initial,
        Some(ids) => {
            let ants: Vec<&Antecedent> = ids.iter().map(|&i| &pool.entries[i as usize].antecedent).collect();
            Prefix::from_antecedents(ants, data)?
        }
    };
    let value = objective(&spec, &prefix, groups, data, bb_preds)?;
    debug_assert_eq!(value.compare(&best.value), Ordering::Equal);
    stats.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(SearchResult {
        prefix,
        objective: value,
        status,
        stats,
        progress,
    })
}
