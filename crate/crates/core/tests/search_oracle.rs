mod common;

use common::{literal_pool, random_dataset, rng, Naive};
use hybridrule::objective::min_captured;
use hybridrule::rules::equiv_groups;
use hybridrule::search::SupportSemantics;
use hybridrule::{optimize, BitMask, Mode, ObjectiveSpec, Policy, SearchConfig, Status};
use rand::Rng;

fn check(seed: u64, mode: Mode, policy: Policy) {
    let mut r = rng(seed);
    let m = r.gen_range(6..14);
    let d = r.gen_range(2..5);
    let data = random_dataset(&mut r, m, d, 0.25);
    let pool = literal_pool(&mut r, d, 3);
    let groups = equiv_groups(&data);
    let bb: Vec<bool> = (0..m).map(|_| r.gen_bool(0.7)).collect();
    let bb_ok: Vec<bool> = bb.iter().enumerate().map(|(i, &c)| if c { data.label(i) } else { !data.label(i) }).collect();
    let lambda = [0.0, 0.01, 0.03, 0.1][r.gen_range(0..4)];
    let psi = [0.0, 0.3, 0.5, 0.8][r.gen_range(0..4)];
    let spec = if mode == Mode::Corels {
        ObjectiveSpec { mode, lambda, beta: 0.0, min_coverage: 0.0 }
    } else {
        ObjectiveSpec::with_auto_beta(mode, lambda, psi, m)
    };
    let max_len = 3;
    let mut cfg = SearchConfig::new(spec);
    cfg.policy = policy;
    cfg.max_length = max_len;
    let bb_mask = BitMask::from_bools(&bb_ok);
    let res = optimize(&data, &pool, &groups, (mode == Mode::Post).then_some(&bb_mask), &cfg).unwrap();
    assert_eq!(res.status, Status::Optimal);

    let naive = Naive::new(&data, Some(&bb_ok));
    let min_cap = min_captured(spec.min_coverage, m);
    let expected = naive.best(&pool, max_len, mode, spec.lambda, spec.beta, min_cap);
    let found = res.objective.total();
    assert!(
        (found - expected).abs() < 1e-12,
        "seed {seed} {mode} {policy}: search {found} vs brute force {expected}"
    );
    assert!(res.prefix.n_captured() >= min_cap);
    // the reported prefix really scores what the search claims
    let ants: Vec<_> = res.prefix.rules().iter().map(|r| &r.antecedent).collect();
    let direct = naive.objective(&ants, mode, spec.lambda, spec.beta, min_cap).unwrap();
    assert!((direct - found).abs() < 1e-12);
    // anytime log never increases
    assert!(res.progress.windows(2).all(|w| w[1].objective.total() <= w[0].objective.total()));
}

#[test]
fn search_matches_brute_force_in_every_mode_and_policy() {
    for seed in 0..40 {
        for mode in Mode::ALL {
            for policy in Policy::ALL {
                check(seed, mode, policy);
            }
        }
    }
}

#[test]
fn search_without_permutation_map_agrees() {
    for seed in 100..120 {
        let mut r = rng(seed);
        let data = random_dataset(&mut r, 12, 4, 0.2);
        let pool = literal_pool(&mut r, 4, 4);
        let groups = equiv_groups(&data);
        for mode in [Mode::Pre, Mode::PreNocollab, Mode::Corels] {
            let spec = ObjectiveSpec::with_auto_beta(mode, 0.02, 0.4, 12);
            let spec = if mode == Mode::Corels { ObjectiveSpec { beta: 0.0, min_coverage: 0.0, ..spec } } else { spec };
            let mut cfg = SearchConfig::new(spec);
            cfg.max_length = 3;
            let a = optimize(&data, &pool, &groups, None, &cfg).unwrap();
            cfg.use_permutation_map = false;
            let b = optimize(&data, &pool, &groups, None, &cfg).unwrap();
            assert!((a.objective.total() - b.objective.total()).abs() < 1e-12);
            assert!(a.stats.nodes_explored <= b.stats.nodes_explored);
        }
    }
}

#[test]
fn raw_support_semantics_only_prunes_low_support_antecedents() {
    let mut r = rng(7);
    let data = random_dataset(&mut r, 40, 4, 0.1);
    let pool = literal_pool(&mut r, 4, 6);
    let groups = equiv_groups(&data);
    let spec = ObjectiveSpec::with_auto_beta(Mode::Pre, 0.01, 0.0, 40);
    let mut cfg = SearchConfig::new(spec);
    cfg.max_length = 3;
    cfg.min_support = 0.1;
    cfg.support_semantics = SupportSemantics::RawSupport;
    let raw = optimize(&data, &pool, &groups, None, &cfg).unwrap();
    cfg.support_semantics = SupportSemantics::NewlyCaptured;
    let newly = optimize(&data, &pool, &groups, None, &cfg).unwrap();
    // newly-captured pruning is at least as strict
    assert!(raw.objective.total() <= newly.objective.total() + 1e-12);
    for (k, mask) in newly.prefix.rule_masks().iter().enumerate() {
        if !newly.prefix.rules()[k].antecedent.is_always_true() {
            assert!(mask.count() >= 4);
        }
    }
}

#[test]
fn time_limit_returns_feasible_incumbent() {
    let mut r = rng(11);
    let data = random_dataset(&mut r, 2000, 14, 0.5);
    let pool = literal_pool(&mut r, 14, 150);
    let groups = equiv_groups(&data);
    let spec = ObjectiveSpec::with_auto_beta(Mode::Pre, 0.0, 0.5, 2000);
    let mut cfg = SearchConfig::new(spec);
    cfg.time_limit = Some(std::time::Duration::from_millis(200));
    let res = optimize(&data, &pool, &groups, None, &cfg).unwrap();
    assert_eq!(res.status, Status::TimeLimit);
    assert!(res.prefix.n_captured() >= 1000);
    assert!(res.stats.wall_time_secs < 5.0);
}

#[test]
fn memory_limit_halts() {
    let mut r = rng(12);
    let data = random_dataset(&mut r, 2000, 14, 0.3);
    let pool = literal_pool(&mut r, 14, 150);
    let groups = equiv_groups(&data);
    let spec = ObjectiveSpec::with_auto_beta(Mode::Pre, 0.0005, 0.5, 2000);
    let mut cfg = SearchConfig::new(spec);
    cfg.memory_limit = Some(64 * 1024);
    let res = optimize(&data, &pool, &groups, None, &cfg).unwrap();
    assert_eq!(res.status, Status::MemoryLimit);
    assert!(res.prefix.n_captured() >= 1000);
}
