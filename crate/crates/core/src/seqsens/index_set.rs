use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Nonempty set of 1-based positions, stored as a bitmask of 64-bit words.
///
/// Sets order like the integers their masks encode, so `{1} < {2} < {1,2} < {3}`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IndexSet {
    // bit p-1 of the mask is position p; no trailing zero words
    words: Vec<u64>,
}

impl IndexSet {
    pub fn from_positions(positions: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut words: Vec<u64> = Vec::new();
        for p in positions {
            if p == 0 {
                return Err(Error::invalid("positions are 1-based"));
            }
            let (w, b) = ((p - 1) / 64, (p - 1) % 64);
            if words.len() <= w {
                words.resize(w + 1, 0);
            }
            words[w] |= 1 << b;
        }
        if words.is_empty() {
            return Err(Error::invalid("index sets must be nonempty"));
        }
        Ok(Self { words })
    }

    /// Contiguous positions `start..=end`.
    pub fn span(start: usize, end: usize) -> Result<Self> {
        if start > end {
            return Err(Error::invalid(format!("empty span {start}..={end}")));
        }
        Self::from_positions(start..=end)
    }

    pub fn contains(&self, position: usize) -> bool {
        if position == 0 {
            return false;
        }
        let (w, b) = ((position - 1) / 64, (position - 1) % 64);
        self.words.get(w).is_some_and(|word| word >> b & 1 == 1)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            (0..64).filter(move |b| word >> b & 1 == 1).map(move |b| w * 64 + b + 1)
        })
    }

    pub fn min_position(&self) -> usize {
        self.positions().next().expect("index sets are nonempty")
    }

    pub fn max_position(&self) -> usize {
        let w = self.words.len() - 1;
        w * 64 + 64 - self.words[w].leading_zeros() as usize
    }

    pub fn is_disjoint(&self, other: &IndexSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.words.len() <= other.words.len()
            && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let len = self.words.len().max(other.words.len());
        let words = (0..len)
            .map(|i| self.words.get(i).copied().unwrap_or(0) | other.words.get(i).copied().unwrap_or(0))
            .collect();
        IndexSet { words }
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    /// Mask as a single word, if every position is at most 64.
    pub fn as_u64(&self) -> Option<u64> {
        (self.words.len() == 1).then(|| self.words[0])
    }
}

impl Ord for IndexSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.words
            .len()
            .cmp(&other.words.len())
            .then_with(|| self.words.iter().rev().cmp(other.words.iter().rev()))
    }
}

impl PartialOrd for IndexSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.positions()).finish()
    }
}

impl Serialize for IndexSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.positions())
    }
}

impl<'de> Deserialize<'de> for IndexSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let positions = Vec::<usize>::deserialize(deserializer)?;
        IndexSet::from_positions(positions).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(p: &[usize]) -> IndexSet {
        IndexSet::from_positions(p.iter().copied()).unwrap()
    }

    #[test]
    fn basics() {
        let s = set(&[3, 1, 70]);
        assert_eq!(s.positions().collect::<Vec<_>>(), vec![1, 3, 70]);
        assert_eq!(s.len(), 3);
        assert_eq!(s.min_position(), 1);
        assert_eq!(s.max_position(), 70);
        assert!(s.contains(70) && !s.contains(2) && !s.contains(0));
        assert!(set(&[2]).is_disjoint(&s));
        assert!(!set(&[70]).is_disjoint(&s));
        assert!(set(&[1, 70]).is_subset(&s));
        assert_eq!(set(&[1]).union(&set(&[65])), set(&[1, 65]));
        assert!(IndexSet::from_positions(Vec::new()).is_err());
        assert!(IndexSet::from_positions([0]).is_err());
    }

    #[test]
    fn ordering_follows_mask_value() {
        let mut v = vec![set(&[3]), set(&[1, 2]), set(&[65]), set(&[2]), set(&[1])];
        v.sort();
        assert_eq!(v, vec![set(&[1]), set(&[2]), set(&[1, 2]), set(&[3]), set(&[65])]);
    }

    #[test]
    fn serializes_as_positions() {
        let s = set(&[2, 5]);
        assert_eq!(serde_json::to_string(&s).unwrap(), "[2,5]");
        let back: IndexSet = serde_json::from_str("[5,2]").unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<IndexSet>("[]").is_err());
    }
}
