//! Fixed-length bit sets packed 64 bits per word.
//!
//! Every per-example set in the crate (feature columns, labels, capture
//! regions) is a `BitMask` over the example indices of one dataset. Bits past
//! `len` in the last word are always zero, so popcounts never need masking.

use std::fmt;

const WORD: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitMask {
    words: Vec<u64>,
    len: usize,
}

#[inline]
fn n_words(len: usize) -> usize {
    len.div_ceil(WORD)
}

impl BitMask {
    pub fn zeros(len: usize) -> Self {
        BitMask {
            words: vec![0; n_words(len)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut m = BitMask {
            words: vec![u64::MAX; n_words(len)],
            len,
        };
        m.clear_tail();
        m
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut m = BitMask::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                m.set(i, true);
            }
        }
        m
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut m = BitMask::zeros(len);
        for i in indices {
            m.set(i, true);
        }
        m
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of range for mask of {}", self.len);
        let bit = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= bit;
        } else {
            self.words[i / WORD] &= !bit;
        }
    }

    fn clear_tail(&mut self) {
        let rem = self.len % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn count_and(&self, other: &BitMask) -> usize {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// Number of bits set in `self` but not in `other`.
    pub fn count_and_not(&self, other: &BitMask) -> usize {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & !b).count_ones() as usize)
            .sum()
    }

    pub fn and(&self, other: &BitMask) -> BitMask {
        debug_assert_eq!(self.len, other.len);
        BitMask {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
            len: self.len,
        }
    }

    pub fn or(&self, other: &BitMask) -> BitMask {
        debug_assert_eq!(self.len, other.len);
        BitMask {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect(),
            len: self.len,
        }
    }

    pub fn and_not(&self, other: &BitMask) -> BitMask {
        debug_assert_eq!(self.len, other.len);
        BitMask {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & !b).collect(),
            len: self.len,
        }
    }

    pub fn not(&self) -> BitMask {
        let mut m = BitMask {
            words: self.words.iter().map(|w| !w).collect(),
            len: self.len,
        };
        m.clear_tail();
        m
    }

    pub fn or_assign(&mut self, other: &BitMask) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn and_assign(&mut self, other: &BitMask) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    /// `self &= !other`
    pub fn and_not_assign(&mut self, other: &BitMask) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    pub fn is_subset(&self, other: &BitMask) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let tz = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * WORD + tz)
                }
            })
        })
    }

    /// Gathers the bits at `indices` into a new mask of length `indices.len()`.
    pub fn select(&self, indices: &[usize]) -> BitMask {
        let mut m = BitMask::zeros(indices.len());
        for (j, &i) in indices.iter().enumerate() {
            if self.get(i) {
                m.set(j, true);
            }
        }
        m
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    pub fn heap_bytes(&self) -> usize {
        self.words.capacity() * std::mem::size_of::<u64>()
    }
}

impl fmt::Debug for BitMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitMask[")?;
        for i in 0..self.len {
            write!(f, "{}", u8::from(self.get(i)))?;
        }
        write!(f, "]")
    }
}
