//! Grid runs over hyperparameters, model selection and Pareto fronts.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitmask::BitMask;
use crate::blackbox::{
    default_terms, specialization_weights, train_builtin, BuiltinModel, LearnerConfig, PredictionSet, PredictionSource, WeightVector,
};
use crate::data::{binarize, load_raw, mine_antecedents, split, AntecedentPool, BinaryDataset, MiningParams, Schema, Splits};
use crate::error::{Error, Result};
use crate::model::{BlackBox, HybridModel, Metrics, ModelMetadata};
use crate::objective::{auto_beta, default_prediction, Mode, ObjectiveSpec};
use crate::rules::{equiv_groups, Antecedent, EquivGroups, Prefix, Rule};
use crate::search::{optimize, Policy, SearchConfig, SearchResult, SearchStats, SupportSemantics, DEFAULT_MAX_LENGTH};

pub const PAPER_MIN_COVERAGES: [f64; 12] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.925, 0.95, 0.975];
pub const PAPER_LAMBDAS: [f64; 3] = [1e-2, 1e-3, 1e-4];
pub const PAPER_MIN_SUPPORTS: [f64; 3] = [0.01, 0.05, 0.10];
pub const METRICS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub mode: Mode,
    pub lambdas: Vec<f64>,
    pub min_coverages: Vec<f64>,
    pub policies: Vec<Policy>,
    pub min_supports: Vec<f64>,
    /// `None` selects `min(1/(2|S|), λ/2)`.
    pub beta: Option<f64>,
    pub alpha: f64,
    pub max_length: usize,
    pub time_limit_secs: Option<f64>,
    pub memory_limit_bytes: Option<usize>,
    pub support_semantics: SupportSemantics,
    pub seed: u64,
    pub learner: LearnerConfig,
    /// L2 strengths tried for the built-in black box in the pre modes; the
    /// one with the lowest specialization-weighted validation loss is kept.
    pub learner_l2_grid: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Pre,
            lambdas: vec![1e-3],
            min_coverages: vec![0.5],
            policies: vec![Policy::LowerBoundGuided],
            min_supports: vec![0.01],
            beta: None,
            alpha: 1.0,
            max_length: DEFAULT_MAX_LENGTH,
            time_limit_secs: Some(3600.0),
            memory_limit_bytes: Some(8_000_000_000),
            support_semantics: SupportSemantics::NewlyCaptured,
            seed: 0,
            learner: LearnerConfig::default(),
            learner_l2_grid: vec![1e-4, 1e-3, 1e-2],
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() || self.min_coverages.is_empty() || self.policies.is_empty() || self.min_supports.is_empty() {
            return Err(Error::Config("every hyperparameter grid needs at least one value".into()));
        }
        if let Some(c) = self.min_coverages.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::Config(format!("min coverage {c} outside [0, 1]")));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(Error::Config(format!("lambda {l} must be finite and >= 0")));
        }
        if let Some(s) = self.min_supports.iter().find(|s| !(0.0..1.0).contains(*s)) {
            return Err(Error::Config(format!("min support {s} outside [0, 1)")));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha {} must be finite and >= 0", self.alpha)));
        }
        if let Some(l) = self.learner_l2_grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(Error::Config(format!("learner l2 {l} must be finite and >= 0")));
        }
        if self.max_length == 0 {
            return Err(Error::Config("max length must be >= 1".into()));
        }
        if self.time_limit_secs.is_some_and(|t| t.is_nan() || t <= 0.0) || self.memory_limit_bytes == Some(0) {
            return Err(Error::Config("limits must be positive".into()));
        }
        Ok(())
    }

    /// Grid cells in a fixed order: coverage, lambda, policy, min support.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &min_coverage in &self.min_coverages {
            for &lambda in &self.lambdas {
                for &policy in &self.policies {
                    for &min_support in &self.min_supports {
                        out.push(Cell {
                            min_coverage,
                            lambda,
                            policy,
                            min_support,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub min_coverage: f64,
    pub lambda: f64,
    pub policy: Policy,
    pub min_support: f64,
}

impl Cell {
    pub fn key(&self) -> String {
        format!("psi={}_lambda={}_policy={}_support={}", self.min_coverage, self.lambda, self.policy, self.min_support)
    }
}

/// Training, validation and test splits plus the antecedent pool.
pub struct Workspace {
    pub train: BinaryDataset,
    pub valid: BinaryDataset,
    pub test: BinaryDataset,
    pub pool: AntecedentPool,
    pub groups: EquivGroups,
}

impl Workspace {
    pub fn new(train: BinaryDataset, valid: BinaryDataset, test: BinaryDataset, pool: AntecedentPool) -> Result<Self> {
        for d in [&valid, &test] {
            if d.names() != train.names() {
                return Err(Error::Data("splits disagree on feature columns".into()));
            }
        }
        let groups = equiv_groups(&train);
        Ok(Workspace {
            train,
            valid,
            test,
            pool,
            groups,
        })
    }
}

pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.6, 0.2, 0.2);

/// Output of the mining pipeline: the binarized table, its splits and the
/// pool mined on the training split.
pub struct Prepared {
    pub full: BinaryDataset,
    pub splits: Splits,
    pub pool: AntecedentPool,
}

pub fn prepare(
    csv: impl AsRef<Path>,
    schema: &Schema,
    quantiles: usize,
    mining: &MiningParams,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<Prepared> {
    let raw = load_raw(csv, schema)?;
    let full = binarize(&raw, quantiles)?;
    let splits = split(&full, fractions, seed)?;
    let pool = mine_antecedents(&splits.train, mining)?;
    Ok(Prepared { full, splits, pool })
}

impl Prepared {
    pub fn workspace(&self) -> Result<Workspace> {
        Workspace::new(
            self.splits.train.clone(),
            self.splits.valid.clone(),
            self.splits.test.clone(),
            self.pool.clone(),
        )
    }
}

/// Black-box predictions for each split (required in post mode).
#[derive(Debug, Clone, Default)]
pub struct BlackBoxPreds {
    pub train: Option<PredictionSet>,
    pub valid: Option<PredictionSet>,
    pub test: Option<PredictionSet>,
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub cell: Cell,
    pub search: SearchResult,
    pub model: HybridModel,
    pub train: Metrics,
    pub valid: Option<Metrics>,
    pub test: Option<Metrics>,
    /// Black-box labels of the test split, used for standalone comparisons.
    pub bb_test: Option<PredictionSet>,
}

fn spec_for(cfg: &RunConfig, cell: &Cell, m: usize) -> ObjectiveSpec {
    match cfg.mode {
        Mode::Corels => ObjectiveSpec {
            mode: Mode::Corels,
            lambda: cell.lambda,
            beta: 0.0,
            min_coverage: 0.0,
        },
        mode => ObjectiveSpec {
            mode,
            lambda: cell.lambda,
            beta: cfg.beta.unwrap_or_else(|| auto_beta(m, cell.lambda)),
            min_coverage: cell.min_coverage,
        },
    }
}

pub fn search_config(cfg: &RunConfig, cell: &Cell, m: usize) -> SearchConfig {
    let mut s = SearchConfig::new(spec_for(cfg, cell, m));
    s.policy = cell.policy;
    s.min_support = cell.min_support;
    s.support_semantics = cfg.support_semantics;
    s.max_length = cfg.max_length;
    s.time_limit = cfg.time_limit_secs.map(Duration::from_secs_f64);
    s.memory_limit = cfg.memory_limit_bytes;
    s
}

/// Trains the built-in black box once per L2 candidate and keeps the lowest
/// weighted validation loss, weighting validation rows by the same scheme as
/// training rows. Falls back to the first candidate without validation rows.
fn fit_specialized(
    ws: &Workspace,
    cfg: &RunConfig,
    prefix: &Prefix,
    w: &WeightVector,
    terms: Vec<Antecedent>,
) -> Result<BuiltinModel> {
    let grid: Vec<f64> = if cfg.learner_l2_grid.is_empty() { vec![cfg.learner.l2] } else { cfg.learner_l2_grid.clone() };
    let valid_w = if ws.valid.n_rows() > 0 {
        let cap = Prefix::from_rules(prefix.rules(), &ws.valid)?;
        Some(specialization_weights(cap.captured(), cfg.alpha)?)
    } else {
        None
    };
    let all = BitMask::ones(ws.valid.n_rows());
    let mut best: Option<(f64, BuiltinModel)> = None;
    for &l2 in &grid {
        let learner = LearnerConfig {
            seed: cfg.seed,
            l2,
            ..cfg.learner.clone()
        };
        let m = train_builtin(&ws.train, w, terms.clone(), &learner)?;
        let Some(vw) = &valid_w else { return Ok(m) };
        let loss = m.weighted_loss(&ws.valid, &vw.weights, &all);
        debug!("l2 {l2}: weighted validation loss {loss:.6}");
        if best.as_ref().is_none_or(|(b, _)| loss < *b) {
            best = Some((loss, m));
        }
    }
    Ok(best.expect("non-empty grid").1)
}

pub fn run_cell(ws: &Workspace, cfg: &RunConfig, cell: &Cell, bb: &BlackBoxPreds) -> Result<CellOutcome> {
    let train = &ws.train;
    let scfg = search_config(cfg, cell, train.n_rows());
    if cfg.mode == Mode::Post && bb.train.is_none() {
        return Err(Error::Config("post mode needs training-split black-box predictions".into()));
    }
    let search = optimize(train, &ws.pool, &ws.groups, bb.train.as_ref().map(|p| &p.labels), &scfg)?;
    let prefix = &search.prefix;

    let mut rules: Vec<Rule> = prefix.rules().to_vec();
    let mut bb_test = None;
    let blackbox = match cfg.mode {
        Mode::Corels => {
            rules.push(Rule {
                antecedent: Antecedent::always_true(),
                consequent: default_prediction(prefix, train),
            });
            BlackBox::None
        }
        Mode::Post => {
            bb_test = bb.test.clone();
            match &bb.train.as_ref().map(|p| &p.source) {
                Some(PredictionSource::File { path }) => BlackBox::File { path: path.clone() },
                _ => BlackBox::File {
                    path: "<in-memory>".into(),
                },
            }
        }
        Mode::Pre | Mode::PreNocollab => {
            let w = specialization_weights(prefix.captured(), cfg.alpha)?;
            let terms = default_terms(train, ws.pool.antecedents());
            let m = fit_specialized(ws, cfg, prefix, &w, terms)?;
            bb_test = Some(m.predict(&ws.test)?);
            BlackBox::Builtin(m)
        }
    };
    let mut metadata = ModelMetadata::from_objective(&search.objective, prefix.coverage(), search.status.as_str());
    metadata.policy = cell.policy.to_string();
    metadata.min_support = cell.min_support;
    metadata.train_rows = train.n_rows();
    let model = HybridModel {
        mode: cfg.mode,
        feature_names: train.names().to_vec(),
        rules,
        lambda: scfg.objective.lambda,
        beta: scfg.objective.beta,
        min_coverage: scfg.objective.min_coverage,
        alpha: cfg.mode.is_pre().then_some(cfg.alpha),
        blackbox,
        metadata,
    };
    let eval = |d: &BinaryDataset, p: &Option<PredictionSet>| -> Result<Option<Metrics>> {
        if cfg.mode == Mode::Post && p.is_none() {
            return Ok(None);
        }
        model.evaluate(d, p.as_ref()).map(Some)
    };
    let train_m = eval(train, &bb.train)?.expect("train metrics");
    let valid = eval(&ws.valid, &bb.valid)?;
    let test = eval(&ws.test, &bb.test)?;
    Ok(CellOutcome {
        cell: *cell,
        search,
        train: train_m,
        valid,
        test,
        model,
        bb_test,
    })
}

/// Runs every cell (in parallel); results keep the cell order.
pub fn run_grid(ws: &Workspace, cfg: &RunConfig, bb: &BlackBoxPreds) -> Result<Vec<(Cell, Result<CellOutcome>)>> {
    cfg.validate()?;
    if cfg.mode == Mode::Post && bb.train.is_none() {
        return Err(Error::Config("post mode needs training-split black-box predictions".into()));
    }
    let cells = cfg.cells();
    let out: Vec<_> = cells
        .par_iter()
        .map(|c| {
            let started = Instant::now();
            let r = run_cell(ws, cfg, c, bb);
            match &r {
                Ok(o) => info!(
                    "cell {} -> objective {:.6}, status {}, {:.2}s",
                    c.key(),
                    o.search.objective.total(),
                    o.search.status.as_str(),
                    started.elapsed().as_secs_f64()
                ),
                Err(e) => warn!("cell {} failed: {e}", c.key()),
            }
            (*c, r)
        })
        .collect();
    Ok(out)
}

/// Score used to pick one model per coverage level: hybrid validation
/// accuracy, except in the pre modes where the prefix is chosen before its
/// black box exists and is scored on the validation examples it captures.
pub fn selection_score(o: &CellOutcome, mode: Mode) -> f64 {
    match (&o.valid, mode.is_pre()) {
        (Some(v), true) => v.interpretable_accuracy.unwrap_or(0.0),
        (Some(v), false) => v.accuracy,
        (None, _) => -o.search.objective.total(),
    }
}

/// Best outcome per requested coverage; ties prefer higher validation
/// transparency, then lower objective, then the earlier cell.
pub fn select_per_coverage(outcomes: &[CellOutcome], mode: Mode) -> Vec<&CellOutcome> {
    let mut seen: Vec<f64> = Vec::new();
    for o in outcomes {
        if !seen.contains(&o.cell.min_coverage) {
            seen.push(o.cell.min_coverage);
        }
    }
    seen.iter()
        .filter_map(|&c| {
            outcomes.iter().filter(|o| o.cell.min_coverage == c).reduce(|best, o| {
                let key = |x: &CellOutcome| {
                    (
                        selection_score(x, mode),
                        x.valid.as_ref().map_or(0.0, |v| v.transparency),
                        -x.search.objective.total(),
                    )
                };
                let (a, b) = (key(best), key(o));
                if b.0 > a.0 || (b.0 == a.0 && (b.1 > a.1 || (b.1 == a.1 && b.2 > a.2))) {
                    o
                } else {
                    best
                }
            })
        })
        .collect()
}

/// Non-dominated flags over `(accuracy, transparency)`, both maximized.
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<bool> {
    points
        .iter()
        .map(|&(a, t)| {
            !points
                .iter()
                .any(|&(a2, t2)| a2 >= a && t2 >= t && (a2 > a || t2 > t))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoRecord {
    pub mode: Mode,
    pub min_coverage: f64,
    pub lambda: f64,
    pub policy: Policy,
    pub min_support: f64,
    pub status: Option<String>,
    pub objective: Option<f64>,
    pub prefix_length: Option<usize>,
    pub train_transparency: Option<f64>,
    pub train_accuracy: Option<f64>,
    pub valid_transparency: Option<f64>,
    pub valid_accuracy: Option<f64>,
    /// Test metrics are reported for front members only.
    pub test_transparency: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub on_front: bool,
    pub error: Option<String>,
    pub wall_time_secs: f64,
    pub stats: Option<SearchStats>,
}

/// Test metrics are filled for front members only unless `all_tests` is set.
pub fn pareto_records(mode: Mode, results: &[(Cell, Result<CellOutcome>)], all_tests: bool) -> Vec<ParetoRecord> {
    let mut records: Vec<ParetoRecord> = results
        .iter()
        .map(|(c, r)| {
            let mut rec = ParetoRecord {
                mode,
                min_coverage: c.min_coverage,
                lambda: c.lambda,
                policy: c.policy,
                min_support: c.min_support,
                status: None,
                objective: None,
                prefix_length: None,
                train_transparency: None,
                train_accuracy: None,
                valid_transparency: None,
                valid_accuracy: None,
                test_transparency: None,
                test_accuracy: None,
                on_front: false,
                error: None,
                wall_time_secs: 0.0,
                stats: None,
            };
            match r {
                Ok(o) => {
                    rec.status = Some(o.search.status.as_str().to_string());
                    rec.objective = Some(o.search.objective.total());
                    rec.prefix_length = Some(o.search.prefix.len());
                    rec.train_transparency = Some(o.train.transparency);
                    rec.train_accuracy = Some(o.train.accuracy);
                    rec.valid_transparency = o.valid.as_ref().map(|v| v.transparency);
                    rec.valid_accuracy = o.valid.as_ref().map(|v| v.accuracy);
                    rec.wall_time_secs = o.search.stats.wall_time_secs;
                    rec.stats = Some(o.search.stats.clone());
                }
                Err(e) => rec.error = Some(e.to_string()),
            }
            rec
        })
        .collect();
    let idx: Vec<usize> = (0..records.len())
        .filter(|&i| records[i].valid_accuracy.is_some() && records[i].valid_transparency.is_some())
        .collect();
    let pts: Vec<(f64, f64)> = idx
        .iter()
        .map(|&i| (records[i].valid_accuracy.unwrap(), records[i].valid_transparency.unwrap()))
        .collect();
    for (k, on) in pareto_front(&pts).into_iter().enumerate() {
        let i = idx[k];
        records[i].on_front = on;
        if on || all_tests {
            if let (_, Ok(o)) = &results[i] {
                records[i].test_transparency = o.test.as_ref().map(|t| t.transparency);
                records[i].test_accuracy = o.test.as_ref().map(|t| t.accuracy);
            }
        }
    }
    records
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or(String::new(), |x| x.to_string())
}

pub const METRICS_HEADER: &str = "metrics_version,mode,min_coverage,lambda,policy,min_support,status,objective,prefix_length,train_transparency,train_accuracy,valid_transparency,valid_accuracy,test_transparency,test_accuracy,on_front,error";

/// Metrics table without timings, so reruns compare byte-for-byte.
pub fn metrics_csv(records: &[ParetoRecord]) -> String {
    let mut s = String::new();
    s.push_str(METRICS_HEADER);
    s.push('\n');
    for r in records {
        let error = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        writeln!(
            s,
            "{METRICS_VERSION},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.mode,
            r.min_coverage,
            r.lambda,
            r.policy,
            r.min_support,
            opt(&r.status),
            opt(&r.objective),
            opt(&r.prefix_length),
            opt(&r.train_transparency),
            opt(&r.train_accuracy),
            opt(&r.valid_transparency),
            opt(&r.valid_accuracy),
            opt(&r.test_transparency),
            opt(&r.test_accuracy),
            r.on_front,
            error
        )
        .expect("write to string");
    }
    s
}

pub fn timings_csv(records: &[ParetoRecord]) -> String {
    let mut s = String::from("min_coverage,lambda,policy,min_support,wall_time_secs,nodes_explored,peak_queue\n");
    for r in records {
        let (n, q) = r.stats.as_ref().map_or((0, 0), |st| (st.nodes_explored, st.peak_queue));
        writeln!(s, "{},{},{},{},{},{n},{q}", r.min_coverage, r.lambda, r.policy, r.min_support, r.wall_time_secs)
            .expect("write to string");
    }
    s
}
