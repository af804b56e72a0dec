use std::io::Write;
use std::path::{Path, PathBuf};

use hybridrule::blackbox::{load_predictions, specialization_weights, PredictionSet};
use hybridrule::data::{AntecedentPool, BinaryDataset, MiningParams, Schema};
use hybridrule::harness::{
    metrics_csv, pareto_records, prepare, run_grid, select_per_coverage, timings_csv, BlackBoxPreds, CellOutcome,
    RunConfig, Workspace, PAPER_LAMBDAS, PAPER_MIN_COVERAGES, PAPER_MIN_SUPPORTS,
};
use hybridrule::model::{HybridModel, Route};
use hybridrule::search::SupportSemantics;
use hybridrule::theory::{
    auc_convergence, default_grid, sweet_spot_sweep, tree_space_size, BoundParams, Quadrature, QuadratureRule,
};
use hybridrule::{Error, Policy, Prefix, Result};
use log::info;
use serde_json::json;

use crate::{ApplyArgs, MineArgs, TheoryArgs, TrainArgs, WeightsArgs};

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
                _ => Ok(()),
            }
        }
    }
}

pub fn mine(a: &MineArgs) -> Result<()> {
    let [tr, va, te] = a.split[..] else {
        return Err(Error::Config("--split needs three fractions".into()));
    };
    let schema = Schema::from_json_file(&a.schema)?;
    let params = MiningParams {
        max_card: a.max_card,
        min_support: a.min_support,
        top_k: a.top_k,
        add_negations: !a.no_negations,
    };
    let prep = prepare(&a.data, &schema, a.quantiles, &params, (tr, va, te), a.seed)?;
    create_dir(&a.out)?;
    prep.full.save_csv(a.out.join("binarized.csv"))?;
    prep.splits.train.save_csv(a.out.join("train.csv"))?;
    prep.splits.valid.save_csv(a.out.join("valid.csv"))?;
    prep.splits.test.save_csv(a.out.join("test.csv"))?;
    prep.pool.save(a.out.join("pool.json"), prep.full.names())?;
    let [i_tr, i_va, i_te] = &prep.splits.indices;
    write(
        &a.out.join("splits.json"),
        serde_json::to_string(&json!({"seed": a.seed, "train": i_tr, "valid": i_va, "test": i_te}))?,
    )?;
    write(&a.out.join("provenance.json"), serde_json::to_string_pretty(&prep.full.provenance)?)?;
    println!(
        "{}",
        json!({
            "rows": prep.full.n_rows(),
            "features": prep.full.n_features(),
            "pool": prep.pool.len(),
            "train": i_tr.len(),
            "valid": i_va.len(),
            "test": i_te.len(),
        })
    );
    Ok(())
}

fn parse_bytes(s: &str) -> Result<usize> {
    let s = s.trim();
    let (num, mult) = match s.chars().last() {
        Some('K' | 'k') => (&s[..s.len() - 1], 1usize << 10),
        Some('M' | 'm') => (&s[..s.len() - 1], 1 << 20),
        Some('G' | 'g') => (&s[..s.len() - 1], 1 << 30),
        _ => (s, 1),
    };
    num.parse::<f64>()
        .ok()
        .filter(|v| *v > 0.0)
        .map(|v| (v * mult as f64) as usize)
        .ok_or_else(|| Error::Config(format!("invalid memory limit {s:?}")))
}

fn run_config(a: &TrainArgs, full_grid: bool) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None if full_grid => RunConfig {
            min_coverages: PAPER_MIN_COVERAGES.to_vec(),
            lambdas: PAPER_LAMBDAS.to_vec(),
            min_supports: PAPER_MIN_SUPPORTS.to_vec(),
            policies: Policy::ALL.to_vec(),
            ..Default::default()
        },
        None => RunConfig::default(),
    };
    if let Some(m) = a.mode {
        cfg.mode = m;
    }
    if !a.min_coverage.is_empty() {
        cfg.min_coverages = a.min_coverage.clone();
    }
    if !a.lambda.is_empty() {
        cfg.lambdas = a.lambda.clone();
    }
    if !a.policy.is_empty() {
        cfg.policies = a.policy.clone();
    }
    if !a.min_support.is_empty() {
        cfg.min_supports = a.min_support.clone();
    }
    match a.beta.as_deref() {
        None => {}
        Some("auto") => cfg.beta = None,
        Some(v) => {
            cfg.beta = Some(
                v.parse()
                    .map_err(|_| Error::Config(format!("--beta expects `auto` or a number, got {v:?}")))?,
            )
        }
    }
    if let Some(x) = a.alpha {
        cfg.alpha = x;
    }
    if let Some(x) = a.max_length {
        cfg.max_length = x;
    }
    if let Some(x) = a.time_limit {
        cfg.time_limit_secs = Some(x);
    }
    if let Some(x) = &a.mem_limit {
        cfg.memory_limit_bytes = Some(parse_bytes(x)?);
    }
    if let Some(x) = a.seed {
        cfg.seed = x;
    }
    if a.raw_support {
        cfg.support_semantics = SupportSemantics::RawSupport;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_workspace(dir: &Path) -> Result<Workspace> {
    let train = BinaryDataset::load_csv(dir.join("train.csv"))?;
    let valid = BinaryDataset::load_csv(dir.join("valid.csv"))?;
    let test = BinaryDataset::load_csv(dir.join("test.csv"))?;
    let pool = AntecedentPool::load(dir.join("pool.json"), &train)?;
    Workspace::new(train, valid, test, pool)
}

fn load_optional(path: &Option<PathBuf>, data: &BinaryDataset) -> Result<Option<PredictionSet>> {
    path.as_ref().map(|p| load_predictions(p, data.n_rows())).transpose()
}

fn black_box(a: &TrainArgs, ws: &Workspace) -> Result<BlackBoxPreds> {
    Ok(BlackBoxPreds {
        train: load_optional(&a.bb_preds, &ws.train)?,
        valid: load_optional(&a.bb_valid_preds, &ws.valid)?,
        test: load_optional(&a.bb_test_preds, &ws.test)?,
    })
}

fn model_file_name(stem: &str, min_coverage: f64, single: bool) -> String {
    if single {
        format!("{stem}.json")
    } else {
        format!("{stem}_psi_{min_coverage}.json")
    }
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let cfg = run_config(a, false)?;
    let ws = load_workspace(&a.data_dir)?;
    let bb = black_box(a, &ws)?;
    create_dir(&a.out)?;
    write(&a.out.join("run_config.json"), serde_json::to_string_pretty(&cfg)?)?;

    let mut outcomes: Vec<CellOutcome> = Vec::new();
    for (_, r) in run_grid(&ws, &cfg, &bb)? {
        outcomes.push(r?);
    }
    let selected = select_per_coverage(&outcomes, cfg.mode);
    let single = selected.len() == 1;
    let mut summary = Vec::new();
    for o in &selected {
        let name = model_file_name("model", o.cell.min_coverage, single);
        o.model.save(a.out.join(&name))?;
        let mut entry = json!({
            "model": name,
            "min_coverage": o.cell.min_coverage,
            "lambda": o.cell.lambda,
            "policy": o.cell.policy,
            "min_support": o.cell.min_support,
            "status": o.search.status.as_str(),
            "objective": o.search.objective.total(),
            "train": o.train,
            "valid": o.valid,
            "test": o.test,
        });
        if cfg.mode.is_pre() {
            let w = specialization_weights(o.search.prefix.captured(), cfg.alpha)?;
            let wname = model_file_name("weights", o.cell.min_coverage, single).replace(".json", ".csv");
            w.save_csv(a.out.join(&wname))?;
            entry["weights"] = json!(wname);
        }
        info!("kept {} for coverage {}", o.cell.key(), o.cell.min_coverage);
        summary.push(entry);
    }
    let results: Vec<_> = selected.iter().map(|o| (o.cell, Ok((*o).clone()))).collect();
    let records = pareto_records(cfg.mode, &results, true);
    write(&a.out.join("metrics.csv"), metrics_csv(&records))?;
    write(&a.out.join("timings.csv"), timings_csv(&records))?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

pub fn pareto(a: &TrainArgs) -> Result<()> {
    let cfg = run_config(a, true)?;
    let ws = load_workspace(&a.data_dir)?;
    let bb = black_box(a, &ws)?;
    create_dir(&a.out)?;
    write(&a.out.join("run_config.json"), serde_json::to_string_pretty(&cfg)?)?;
    let results = run_grid(&ws, &cfg, &bb)?;
    if results.iter().all(|(_, r)| r.is_err()) {
        let config_only = results
            .iter()
            .all(|(_, r)| matches!(r, Err(e) if e.kind() == hybridrule::ErrorKind::Config));
        if config_only {
            if let Some((_, Err(e))) = results.into_iter().next() {
                return Err(e);
            }
        }
        return Err(Error::Infeasible("no grid cell produced a model".into()));
    }
    let records = pareto_records(cfg.mode, &results, false);
    write(&a.out.join("pareto.csv"), metrics_csv(&records))?;
    write(&a.out.join("timings.csv"), timings_csv(&records))?;
    let front: Vec<_> = records.iter().filter(|r| r.on_front).collect();
    write(&a.out.join("front.json"), serde_json::to_string_pretty(&front)?)?;
    println!(
        "{}",
        json!({"cells": records.len(), "failed": records.iter().filter(|r| r.error.is_some()).count(), "front": front.len()})
    );
    Ok(())
}

fn load_apply(a: &ApplyArgs) -> Result<(HybridModel, BinaryDataset, Option<PredictionSet>)> {
    let model = HybridModel::load(&a.model)?;
    let data = BinaryDataset::load_csv(&a.data)?;
    let preds = load_optional(&a.bb_preds, &data)?;
    Ok((model, data, preds))
}

pub fn predict(a: &ApplyArgs) -> Result<()> {
    let (model, data, preds) = load_apply(a)?;
    let out = model.predict_dataset(&data, preds.as_ref())?;
    let mut s = String::from("prediction,route,rule\n");
    for p in out {
        let route = match p.route {
            Route::Interpretable => "interpretable",
            Route::Blackbox => "blackbox",
        };
        let rule = p.rule.map_or(String::new(), |r| r.to_string());
        s.push_str(&format!("{},{route},{rule}\n", p.label as u8));
    }
    emit(a.out.as_deref(), s.trim_end())
}

pub fn eval(a: &ApplyArgs) -> Result<()> {
    let (model, data, preds) = load_apply(a)?;
    let m = model.evaluate(&data, preds.as_ref())?;
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&m)?)
}

pub fn theory(a: &TheoryArgs) -> Result<()> {
    let log_hs = match a.log_hs {
        Some(v) => v,
        None => tree_space_size(a.tree_depth, a.n_features)?,
    };
    let params = BoundParams::with_ratio(log_hs, a.ratio, a.samples)?;
    let q = Quadrature {
        rule: if a.simpson {
            QuadratureRule::Simpson
        } else {
            QuadratureRule::Trapezoid
        },
        nodes: a.nodes,
        ..Default::default()
    };
    let sweep = sweet_spot_sweep(&params, &default_grid(), &q)?;
    create_dir(&a.out)?;
    let mut csv = String::from("C_Omega,normalized_auc\n");
    for (c, v) in sweep.grid.iter().zip(&sweep.values) {
        csv.push_str(&format!("{c},{v:e}\n"));
    }
    write(&a.out.join("auc.csv"), csv)?;
    let c_star = sweep.argmin_transparency();
    let summary = json!({
        "argmin": c_star,
        "argmin_value": sweep.values[sweep.argmin],
        "interior": sweep.interior,
        "log_hs": log_hs,
        "ratio": a.ratio,
        "samples": a.samples,
        "convergence_at_argmin": auc_convergence(c_star, &params, &q)?,
    });
    write(&a.out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    println!("{summary}");
    Ok(())
}

pub fn weights(a: &WeightsArgs) -> Result<()> {
    let model = HybridModel::load(&a.model)?;
    let data = BinaryDataset::load_csv(&a.data)?;
    if data.names() != model.feature_names.as_slice() {
        return Err(Error::Data("dataset features do not match the model".into()));
    }
    let alpha = a
        .alpha
        .or(model.alpha)
        .ok_or_else(|| Error::Config("model has no specialization coefficient; pass --alpha".into()))?;
    let prefix = Prefix::from_rules(&model.rules, &data)?;
    let w = specialization_weights(prefix.captured(), alpha)?;
    w.save_csv(&a.out)?;
    println!("{}", json!({"rows": w.len(), "alpha": alpha, "captured": prefix.n_captured()}));
    Ok(())
}
