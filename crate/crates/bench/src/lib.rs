//! Synthetic workloads shared by the benchmarks.

use hybridrule::data::{AntecedentPool, PoolEntry};
use hybridrule::{Antecedent, BinaryDataset, Literal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `m` rows over `d` binary features; the label is a noisy two-rule disjunction.
pub fn dataset(m: usize, d: usize, noise: f64, seed: u64) -> BinaryDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<bool>> = (0..m)
        .map(|_| (0..d).map(|j| rng.gen_bool(if j % 3 == 0 { 0.3 } else { 0.5 })).collect())
        .collect();
    let labels: Vec<bool> = rows
        .iter()
        .map(|r| ((r[0] && r[1]) || (r[2] && !r[3])) ^ rng.gen_bool(noise))
        .collect();
    BinaryDataset::from_rows(&rows, &labels, None).expect("valid synthetic data")
}

/// All single literals and their negations, then random pairs up to `size`.
pub fn pool(d: usize, size: usize, seed: u64) -> AntecedentPool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ants: Vec<Antecedent> = Vec::with_capacity(size);
    for f in 0..d {
        ants.push(Antecedent::single(Literal::pos(f)));
        ants.push(Antecedent::single(Literal::neg(f)));
    }
    ants.truncate(size);
    while ants.len() < size {
        let a = rng.gen_range(0..d);
        let b = rng.gen_range(0..d);
        if a == b {
            continue;
        }
        let pair = Antecedent::new(vec![
            Literal { feature: a, negated: rng.gen_bool(0.5) },
            Literal { feature: b, negated: rng.gen_bool(0.5) },
        ])
        .expect("two distinct features");
        if !ants.contains(&pair) {
            ants.push(pair);
        }
    }
    AntecedentPool {
        entries: ants
            .into_iter()
            .map(|antecedent| PoolEntry {
                antecedent,
                support: 0,
                duplicate_capture: false,
            })
            .collect(),
        params: Default::default(),
    }
}
