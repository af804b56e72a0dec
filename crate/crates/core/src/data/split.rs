use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::BinaryDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: BinaryDataset,
    pub valid: BinaryDataset,
    pub test: BinaryDataset,
    /// Source row indices of each split, ascending.
    pub indices: [Vec<usize>; 3],
}

/// Split sizes: validation and test get `floor(M * frac)`, the remainder goes to train.
pub fn split_sizes(m: usize, fractions: (f64, f64, f64)) -> Result<[usize; 3]> {
    let (a, b, c) = fractions;
    if a <= 0.0 || b <= 0.0 || c <= 0.0 || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions must be positive and sum to 1, got ({a}, {b}, {c})"
        )));
    }
    let valid = (m as f64 * b).floor() as usize;
    let test = (m as f64 * c).floor() as usize;
    let train = m.saturating_sub(valid + test);
    if train == 0 || valid == 0 || test == 0 {
        return Err(Error::Data(format!(
            "split of {m} rows yields an empty part ({train}, {valid}, {test})"
        )));
    }
    Ok([train, valid, test])
}

pub fn split(data: &BinaryDataset, fractions: (f64, f64, f64), seed: u64) -> Result<Splits> {
    let m = data.n_rows();
    let [n_train, n_valid, _] = split_sizes(m, fractions)?;
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..n_train].to_vec();
    let mut valid = order[n_train..n_train + n_valid].to_vec();
    let mut test = order[n_train + n_valid..].to_vec();
    train.sort_unstable();
    valid.sort_unstable();
    test.sort_unstable();
    Ok(Splits {
        train: data.subset(&train),
        valid: data.subset(&valid),
        test: data.subset(&test),
        indices: [train, valid, test],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(m: usize) -> BinaryDataset {
        let r: Vec<Vec<bool>> = (0..m).map(|i| vec![i % 2 == 0, i % 3 == 0]).collect();
        let y: Vec<bool> = (0..m).map(|i| i % 5 == 0).collect();
        BinaryDataset::from_rows(&r, &y, None).unwrap()
    }

    #[test]
    fn sizes_follow_floor_then_remainder() {
        assert_eq!(split_sizes(10, (0.6, 0.2, 0.2)).unwrap(), [6, 2, 2]);
        assert_eq!(split_sizes(7, (0.6, 0.2, 0.2)).unwrap(), [5, 1, 1]);
        assert!(split_sizes(4, (0.6, 0.2, 0.2)).is_err());
        assert!(split_sizes(10, (0.6, 0.2, 0.3)).is_err());
    }

    #[test]
    fn partition_and_determinism() {
        let d = rows(57);
        let s1 = split(&d, (0.6, 0.2, 0.2), 3).unwrap();
        let s2 = split(&d, (0.6, 0.2, 0.2), 3).unwrap();
        assert_eq!(s1.indices, s2.indices);
        let mut all: Vec<usize> = s1.indices.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..57).collect::<Vec<_>>());
        assert_eq!(s1.train.n_rows() + s1.valid.n_rows() + s1.test.n_rows(), 57);
        for (k, &i) in s1.indices[2].iter().enumerate() {
            assert_eq!(s1.test.row(k), d.row(i));
            assert_eq!(s1.test.label(k), d.label(i));
        }
        let s3 = split(&d, (0.6, 0.2, 0.2), 4).unwrap();
        assert_ne!(s1.indices, s3.indices);
    }
}
