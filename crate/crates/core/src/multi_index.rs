//! Sorted multi-indices `I = (i_1 < … < i_q)` labelling the basis forms `dz̄^I`.
//!
//! Factor indices are 0-based in the API. Display and the snapshot format use
//! 1-based indices so that `dz̄1∧dz̄2` reads the usual way.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{DbpError, Result};

/// Maximum number of factors a multi-index can address.
pub const MAX_FACTORS: usize = 32;

/// A strictly increasing set of factor indices, stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct MultiIndex(u32);

impl MultiIndex {
    pub const EMPTY: MultiIndex = MultiIndex(0);

    pub fn from_slice(indices: &[usize]) -> Result<Self> {
        let mut bits = 0u32;
        let mut prev: Option<usize> = None;
        for &i in indices {
            if i >= MAX_FACTORS || prev.is_some_and(|p| p >= i) {
                return Err(DbpError::NotStrictlyIncreasing(indices.to_vec()));
            }
            bits |= 1 << i;
            prev = Some(i);
        }
        Ok(MultiIndex(bits))
    }

    pub fn single(j: usize) -> Self {
        assert!(j < MAX_FACTORS);
        MultiIndex(1 << j)
    }

    /// All indices `0..m`.
    pub fn full(m: usize) -> Self {
        assert!(m <= MAX_FACTORS);
        if m == MAX_FACTORS {
            MultiIndex(u32::MAX)
        } else {
            MultiIndex((1u32 << m) - 1)
        }
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn from_bits(bits: u32) -> Self {
        MultiIndex(bits)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, j: usize) -> bool {
        j < MAX_FACTORS && self.0 & (1 << j) != 0
    }

    pub fn indices(self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..MAX_FACTORS).filter(move |&j| self.0 & (1 << j) != 0)
    }

    pub fn min(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    /// Number of entries strictly below `j`.
    pub fn count_below(self, j: usize) -> usize {
        if j >= MAX_FACTORS {
            return self.len();
        }
        (self.0 & ((1u32 << j) - 1)).count_ones() as usize
    }

    /// `dz̄_j ∧ dz̄^I = sign · dz̄^{I ∪ {j}}`.
    pub fn wedge_insert(self, j: usize) -> Result<(MultiIndex, f64)> {
        if self.contains(j) {
            return Err(DbpError::DuplicateGenerator(j));
        }
        Ok((MultiIndex(self.0 | (1 << j)), parity(self.count_below(j))))
    }

    /// `dz̄^I = sign · dz̄_j ∧ dz̄^{I \ {j}}`, or `None` when `j ∉ I`.
    pub fn extract_front(self, j: usize) -> Option<(MultiIndex, f64)> {
        if !self.contains(j) {
            return None;
        }
        Some((MultiIndex(self.0 & !(1 << j)), parity(self.count_below(j))))
    }

    /// Entries `< cut` and entries `≥ cut`.
    pub fn split_counts(self, cut: usize) -> (usize, usize) {
        let low = self.count_below(cut);
        (low, self.len() - low)
    }

    /// All multi-indices of length `q` over `0..m`, in canonical order.
    pub fn all_of_degree(m: usize, q: usize) -> Vec<MultiIndex> {
        let mut out: Vec<MultiIndex> = (0u32..(1u32 << m))
            .map(MultiIndex)
            .filter(|i| i.len() == q)
            .collect();
        out.sort();
        out
    }
}

fn parity(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.indices().cmp(&other.indices()))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MultiIndex{:?}", self.indices())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.iter().map(|j| format!("dz̄{}", j + 1)).collect();
        write!(f, "{}", parts.join("∧"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(v: &[usize]) -> MultiIndex {
        MultiIndex::from_slice(v).unwrap()
    }

    #[test]
    fn wedge_insert_examples() {
        // 0-based: (2,3),1 -> (1,2,3) becomes (1,2),0 -> (0,1,2)
        assert_eq!(mi(&[1, 2]).wedge_insert(0).unwrap(), (mi(&[0, 1, 2]), 1.0));
        assert_eq!(mi(&[0, 2]).wedge_insert(1).unwrap(), (mi(&[0, 1, 2]), -1.0));
        assert_eq!(MultiIndex::EMPTY.wedge_insert(4).unwrap(), (mi(&[4]), 1.0));
    }

    #[test]
    fn wedge_insert_duplicate_is_error() {
        assert!(matches!(
            mi(&[0, 2]).wedge_insert(2),
            Err(DbpError::DuplicateGenerator(2))
        ));
    }

    #[test]
    fn rejects_unsorted() {
        assert!(MultiIndex::from_slice(&[2, 1]).is_err());
        assert!(MultiIndex::from_slice(&[1, 1]).is_err());
    }

    #[test]
    fn extract_front_inverts_insert() {
        let i = mi(&[0, 3]);
        let (j, s) = i.wedge_insert(2).unwrap();
        let (back, s2) = j.extract_front(2).unwrap();
        assert_eq!(back, i);
        assert_eq!(s * s2, 1.0);
        assert!(i.extract_front(1).is_none());
    }

    #[test]
    fn ordering_is_degree_then_lex() {
        let mut v = vec![mi(&[1, 2]), mi(&[2]), MultiIndex::EMPTY, mi(&[0, 2]), mi(&[0])];
        v.sort();
        assert_eq!(
            v,
            vec![MultiIndex::EMPTY, mi(&[0]), mi(&[2]), mi(&[0, 2]), mi(&[1, 2])]
        );
        assert_eq!(MultiIndex::all_of_degree(3, 2).len(), 3);
    }

    #[test]
    fn split_counts() {
        assert_eq!(mi(&[0, 2, 3]).split_counts(1), (1, 2));
        assert_eq!(mi(&[0, 2, 3]).split_counts(0), (0, 3));
        assert_eq!(mi(&[0, 2, 3]).split_counts(4), (3, 0));
    }

    #[test]
    fn display_is_one_based() {
        assert_eq!(mi(&[0, 1]).to_string(), "dz̄1∧dz̄2");
        assert_eq!(MultiIndex::EMPTY.to_string(), "1");
    }

    proptest::proptest! {
        #[test]
        fn insertion_anticommutes(bits in 0u32..256, j in 0usize..8, l in 0usize..8) {
            let i = MultiIndex::from_bits(bits);
            proptest::prop_assume!(j != l && !i.contains(j) && !i.contains(l));
            let (a, s1) = i.wedge_insert(j).unwrap();
            let (ab, s2) = a.wedge_insert(l).unwrap();
            let (b, t1) = i.wedge_insert(l).unwrap();
            let (ba, t2) = b.wedge_insert(j).unwrap();
            proptest::prop_assert_eq!(ab, ba);
            proptest::prop_assert_eq!(s1 * s2, -(t1 * t2));
        }
    }
}
