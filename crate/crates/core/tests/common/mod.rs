//! Naive reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::HashMap;

use hybridrule::data::{AntecedentPool, PoolEntry};
use hybridrule::{Antecedent, BinaryDataset, Literal, Mode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_dataset(rng: &mut ChaCha8Rng, m: usize, d: usize, noise: f64) -> BinaryDataset {
    let rows: Vec<Vec<bool>> = (0..m).map(|_| (0..d).map(|_| rng.gen_bool(0.5)).collect()).collect();
    let labels: Vec<bool> = rows
        .iter()
        .map(|r| (r[0] && r.get(1).copied().unwrap_or(true)) ^ rng.gen_bool(noise))
        .collect();
    BinaryDataset::from_rows(&rows, &labels, None).unwrap()
}

/// Every single literal plus a few random pairs.
pub fn literal_pool(rng: &mut ChaCha8Rng, d: usize, pairs: usize) -> AntecedentPool {
    let mut ants = Vec::new();
    for f in 0..d {
        ants.push(Antecedent::single(Literal::pos(f)));
        ants.push(Antecedent::single(Literal::neg(f)));
    }
    for _ in 0..pairs {
        let a = rng.gen_range(0..d);
        let mut b = rng.gen_range(0..d);
        while b == a {
            b = rng.gen_range(0..d);
        }
        let la = Literal { feature: a, negated: rng.gen_bool(0.5) };
        let lb = Literal { feature: b, negated: rng.gen_bool(0.5) };
        ants.push(Antecedent::new(vec![la, lb]).unwrap());
    }
    AntecedentPool {
        entries: ants
            .into_iter()
            .map(|antecedent| PoolEntry { antecedent, support: 0, duplicate_capture: false })
            .collect(),
        params: Default::default(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parts {
    pub num: usize,
    pub den: usize,
    pub rules: usize,
    pub uncaptured: usize,
    pub total: f64,
}

pub struct Naive<'a> {
    pub rows: Vec<Vec<bool>>,
    pub labels: Vec<bool>,
    pub bb: Option<&'a [bool]>,
    pub tie: bool,
}

impl<'a> Naive<'a> {
    pub fn new(data: &BinaryDataset, bb: Option<&'a [bool]>) -> Self {
        let rows: Vec<Vec<bool>> = (0..data.n_rows()).map(|i| data.row(i)).collect();
        let labels: Vec<bool> = (0..data.n_rows()).map(|i| data.label(i)).collect();
        let pos = labels.iter().filter(|&&y| y).count();
        Naive { tie: 2 * pos >= labels.len(), rows, labels, bb }
    }

    fn matches(a: &Antecedent, x: &[bool]) -> bool {
        a.literals().iter().all(|l| x[l.feature] != l.negated)
    }

    fn majority(&self, idx: &[usize]) -> bool {
        let pos = idx.iter().filter(|&&i| self.labels[i]).count();
        match (2 * pos).cmp(&idx.len()) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => self.tie,
        }
    }

    /// `(prefix errors, captured rows)` with majority consequents.
    fn prefix_stats(&self, seq: &[&Antecedent]) -> (usize, Vec<bool>) {
        let m = self.rows.len();
        let mut captured = vec![false; m];
        let mut errors = 0;
        for a in seq {
            let newly: Vec<usize> = (0..m).filter(|&i| !captured[i] && Self::matches(a, &self.rows[i])).collect();
            let q = self.majority(&newly);
            errors += newly.iter().filter(|&&i| self.labels[i] != q).count();
            for i in newly {
                captured[i] = true;
            }
        }
        (errors, captured)
    }

    fn incons(&self, captured: &[bool]) -> usize {
        let mut groups: HashMap<&[bool], (usize, usize)> = HashMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            if !captured[i] {
                let e = groups.entry(r.as_slice()).or_default();
                if self.labels[i] {
                    e.1 += 1
                } else {
                    e.0 += 1
                }
            }
        }
        groups.values().map(|&(n, p)| n.min(p)).sum()
    }

    /// Objective of `seq`, `None` when undefined or infeasible.
    pub fn objective(&self, seq: &[&Antecedent], mode: Mode, lambda: f64, beta: f64, min_cap: usize) -> Option<f64> {
        self.parts(seq, mode, lambda, beta, min_cap).map(|p| p.total)
    }

    pub fn parts(&self, seq: &[&Antecedent], mode: Mode, lambda: f64, beta: f64, min_cap: usize) -> Option<Parts> {
        let m = self.rows.len();
        let (errors, captured) = self.prefix_stats(seq);
        let n = captured.iter().filter(|&&c| c).count();
        if n < min_cap {
            return None;
        }
        let unc: Vec<usize> = (0..m).filter(|&i| !captured[i]).collect();
        let rules = seq.len();
        let (num, den) = match mode {
            Mode::Corels => {
                let d = self.majority(&unc);
                (errors + unc.iter().filter(|&&i| self.labels[i] != d).count(), m)
            }
            Mode::Post => {
                let bb = self.bb.expect("black box");
                (errors + unc.iter().filter(|&&i| bb[i] != self.labels[i]).count(), m)
            }
            Mode::Pre => (errors + self.incons(&captured), m),
            Mode::PreNocollab => {
                if n == 0 {
                    return None;
                }
                (errors, n)
            }
        };
        let uncaptured = if mode == Mode::Corels { 0 } else { unc.len() };
        let total = num as f64 / den as f64 + lambda * rules as f64 + beta * uncaptured as f64 / m as f64;
        Some(Parts { num, den, rules, uncaptured, total })
    }

    /// Best objective over every ordered sequence of distinct pool entries of
    /// length `<= max_len`, plus the always-true majority rule.
    pub fn best(&self, pool: &AntecedentPool, max_len: usize, mode: Mode, lambda: f64, beta: f64, min_cap: usize) -> f64 {
        self.argmins(pool, max_len, mode, lambda, beta, min_cap, 0.0)[0].total
    }

    /// Every candidate whose objective is within `tol` of the optimum.
    #[allow(clippy::too_many_arguments)]
    pub fn argmins(
        &self,
        pool: &AntecedentPool,
        max_len: usize,
        mode: Mode,
        lambda: f64,
        beta: f64,
        min_cap: usize,
        tol: f64,
    ) -> Vec<Parts> {
        let ants: Vec<&Antecedent> = pool.antecedents().collect();
        let always = Antecedent::always_true();
        let mut all = vec![self.parts(&[&always], mode, lambda, beta, min_cap).unwrap()];
        let mut seq: Vec<usize> = Vec::new();
        self.walk(&ants, &mut seq, max_len, &mut |s| {
            let refs: Vec<&Antecedent> = s.iter().map(|&i| ants[i]).collect();
            if let Some(p) = self.parts(&refs, mode, lambda, beta, min_cap) {
                all.push(p);
            }
        });
        let best = all.iter().map(|p| p.total).fold(f64::INFINITY, f64::min);
        all.retain(|p| p.total <= best + tol);
        all.sort_by(|a, b| a.total.total_cmp(&b.total));
        all
    }

    fn walk(&self, ants: &[&Antecedent], seq: &mut Vec<usize>, max_len: usize, f: &mut dyn FnMut(&[usize])) {
        f(seq);
        if seq.len() == max_len {
            return;
        }
        for i in 0..ants.len() {
            if !seq.contains(&i) {
                seq.push(i);
                self.walk(ants, seq, max_len, f);
                seq.pop();
            }
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
