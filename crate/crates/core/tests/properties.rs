mod common;

use common::{literal_pool, random_dataset, rng};
use hybridrule::blackbox::specialization_weights;
use hybridrule::harness::{pareto_front, RunConfig};
use hybridrule::objective::{
    auto_beta, default_prediction, lb_corels, lb_post, lb_pre_nocollab, obj_corels, obj_post, obj_pre,
    obj_pre_nocollab,
};
use hybridrule::rules::{assign, equiv_groups};
use hybridrule::theory::{bound_b, log_bound_b, BoundParams};
use hybridrule::{optimize, BinaryDataset, BitMask, Mode, ObjectiveSpec, Policy, Prefix, SearchConfig};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

/// Direct evaluation of the four-term bound, fine for small spaces and samples.
fn direct_bound(eps: f64, c: f64, hc: f64, hs: f64, m: i32) -> f64 {
    let cb = 1.0 - c;
    (1.0 - hc) * c.powi(m) + (1.0 - hs) * cb.powi(m) + hc * (cb * (-eps).exp() + c).powi(m)
        + hs * (c * (-eps).exp() + cb).powi(m)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

struct Case {
    data: BinaryDataset,
    parent: Prefix,
    child: Prefix,
    arbitrary_bb: BitMask,
    feature_bb: BitMask,
}

/// A random prefix and a strict extension of it.
fn case(seed: u64) -> Case {
    let mut r = rng(seed);
    let m = r.gen_range(10..120);
    let d = r.gen_range(2..6);
    let noise = r.gen_range(0.0..0.4);
    let data = random_dataset(&mut r, m, d, noise);
    let pool = literal_pool(&mut r, d, 4);
    let mut ants: Vec<_> = pool.antecedents().cloned().collect();
    ants.shuffle(&mut r);
    let k = r.gen_range(0..3);
    let extra = r.gen_range(1..4);
    let parent = Prefix::from_antecedents(&ants[..k], &data).unwrap();
    let mut child = parent.clone();
    for a in &ants[k..k + extra] {
        child = child.extend(a, &data);
    }
    let arbitrary_bb = BitMask::from_bools(&(0..m).map(|_| r.gen_bool(0.5)).collect::<Vec<_>>());
    let feature_bb = data.feature(0).and(data.feature(1 % d)).not();
    Case {
        data,
        parent,
        child,
        arbitrary_bb,
        feature_bb,
    }
}

const SLACK: f64 = 1e-12;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn weights_normalize_and_keep_the_ratio(bits in prop::collection::vec(any::<bool>(), 1..300), alpha in 0.0f64..30.0) {
        let mask = BitMask::from_bools(&bits);
        let w = specialization_weights(&mask, alpha).unwrap();
        prop_assert_eq!(w.len(), bits.len());
        prop_assert!((w.sum() - 1.0).abs() < 1e-12);
        prop_assert!(w.weights.iter().all(|x| *x > 0.0 && x.is_finite()));
        let cap = bits.iter().position(|b| *b);
        let unc = bits.iter().position(|b| !*b);
        if let (Some(c), Some(u)) = (cap, unc) {
            prop_assert!(rel_close(w.weights[u] / w.weights[c], alpha.exp(), 1e-12));
        }
    }

    #[test]
    fn uncaptured_mass_grows_with_alpha(bits in prop::collection::vec(any::<bool>(), 2..200), a in 0.0f64..10.0, da in 0.0f64..5.0) {
        let mask = BitMask::from_bools(&bits);
        let lo = specialization_weights(&mask, a).unwrap().mass_outside(&mask);
        let hi = specialization_weights(&mask, a + da).unwrap().mass_outside(&mask);
        prop_assert!(hi >= lo - 1e-12);
    }

    #[test]
    fn lower_bounds_hold_for_strict_extensions(seed in any::<u64>(), lambda in 0.0f64..0.05) {
        let c = case(seed);
        let (data, p, q) = (&c.data, &c.parent, &c.child);
        let groups = equiv_groups(data);
        let beta = auto_beta(data.n_rows(), lambda);

        let lb = lb_corels(p, &groups, data, lambda).total();
        prop_assert!(lb <= obj_pre(q, &groups, data, lambda, beta).total() + SLACK);
        prop_assert!(lb <= obj_corels(q, default_prediction(q, data), data, lambda).total() + SLACK);
        prop_assert!(lb <= obj_post(q, &c.feature_bb, data, lambda, beta).unwrap().total() + SLACK);

        let lbp = lb_post(p, &groups, &c.arbitrary_bb, data, lambda).unwrap().total();
        prop_assert!(lbp <= obj_post(q, &c.arbitrary_bb, data, lambda, beta).unwrap().total() + SLACK);

        if q.n_captured() > 0 {
            let lbn = lb_pre_nocollab(p, &groups, data, lambda).unwrap().total();
            let obj = obj_pre_nocollab(q, data, lambda, beta).unwrap().total();
            prop_assert!(lbn <= obj + SLACK, "{lbn} > {obj}");
        }
    }

    #[test]
    fn corels_bound_exceeds_pre_objective_by_the_gap(seed in any::<u64>(), lambda in 1e-4f64..0.05) {
        let c = case(seed);
        let (data, p) = (&c.data, &c.parent);
        let groups = equiv_groups(data);
        let m = data.n_rows() as f64;
        let beta = auto_beta(data.n_rows(), lambda);
        let unc = (data.n_rows() - p.n_captured()) as f64;
        let gap = lb_corels(p, &groups, data, lambda).total() - obj_pre(p, &groups, data, lambda, beta).total();
        prop_assert!((gap - (lambda - beta * unc / m)).abs() < 1e-12);
        prop_assert!(gap > 0.0);
    }

    #[test]
    fn prefix_capture_agrees_with_first_match(seed in any::<u64>()) {
        let c = case(seed);
        let q = &c.child;
        for i in 0..c.data.n_rows() {
            let a = assign(q.rules(), &c.data.row(i));
            prop_assert_eq!(a.captured, q.captured().get(i));
            prop_assert_eq!(a.rule, q.rule_of(i));
            prop_assert_eq!(a, q.assign(&c.data.row(i)));
        }
    }

    #[test]
    fn bound_log_domain_matches_direct(eps in 1e-3f64..1.0, c in 0.0f64..=1.0, lhs in 0.0f64..3.0, extra in 0.0f64..3.0, m in 1u64..60) {
        let p = BoundParams::new(lhs + extra, lhs, m).unwrap();
        let direct = direct_bound(eps, c, p.log_hc.exp(), p.log_hs.exp(), m as i32);
        prop_assert!(rel_close(bound_b(eps, c, &p), direct, 1e-9), "{} vs {direct}", bound_b(eps, c, &p));
    }

    #[test]
    fn bound_is_symmetric_for_equal_spaces(eps in 1e-3f64..1.0, c in 0.0f64..=1.0, lh in 0.0f64..50.0, m in 1u64..10_000) {
        let p = BoundParams::new(lh, lh, m).unwrap();
        prop_assert!(rel_close(log_bound_b(eps, c, &p), log_bound_b(eps, 1.0 - c, &p), 1e-9));
    }

    #[test]
    fn bound_decreases_in_epsilon(e1 in 1e-4f64..1.0, de in 0.0f64..1.0, c in 0.0f64..=1.0, lhs in 0.0f64..40.0, n in 1.0f64..1e3, m in 1u64..20_000) {
        let p = BoundParams::with_ratio(lhs, n, m).unwrap();
        let e2 = (e1 + de).min(1.0);
        prop_assert!(log_bound_b(e2, c, &p) <= log_bound_b(e1, c, &p) + 1e-12);
    }

    #[test]
    fn front_matches_brute_force(pts in prop::collection::vec((0u8..20, 0u8..20), 0..40)) {
        let pts: Vec<(f64, f64)> = pts.iter().map(|&(a, t)| (a as f64 / 20.0, t as f64 / 20.0)).collect();
        let flags = pareto_front(&pts);
        for (i, p) in pts.iter().enumerate() {
            let dominated = pts.iter().any(|q| q.0 >= p.0 && q.1 >= p.1 && (q.0 > p.0 || q.1 > p.1));
            prop_assert_eq!(flags[i], !dominated);
        }
    }

    #[test]
    fn run_config_json_is_lossless(
        lambdas in prop::collection::vec(0.0f64..1.0, 1..4),
        covs in prop::collection::vec(0.0f64..=1.0, 1..5),
        seed in any::<u64>(),
        beta in prop::option::of(0.0f64..1e-3),
    ) {
        let cfg = RunConfig { lambdas, min_coverages: covs, seed, beta, ..Default::default() };
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn optimized_prefixes_meet_the_coverage_constraint(seed in any::<u64>(), psi in 0.0f64..=1.0, mode_ix in 0usize..3, pol in 0usize..3) {
        let mut r = rng(seed);
        let m = r.gen_range(20..150);
        let d = r.gen_range(2..6);
        let data = random_dataset(&mut r, m, d, 0.2);
        let pool = literal_pool(&mut r, d, 3);
        let groups = equiv_groups(&data);
        let mode = [Mode::Post, Mode::Pre, Mode::PreNocollab][mode_ix];
        let bb = BitMask::from_bools(&(0..m).map(|_| r.gen_bool(0.7)).collect::<Vec<_>>());
        let mut cfg = SearchConfig::new(ObjectiveSpec::with_auto_beta(mode, 0.01, psi, m));
        cfg.policy = Policy::ALL[pol];
        cfg.max_length = 3;
        let res = optimize(&data, &pool, &groups, Some(&bb), &cfg).unwrap();
        prop_assert!(res.prefix.n_captured() as f64 >= psi * m as f64 - 1e-9);
    }
}
