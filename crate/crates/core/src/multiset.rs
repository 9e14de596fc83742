use std::collections::BTreeMap;

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

/// A finite multiset with canonical (sorted) iteration order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Multiset<T: Ord> {
    counts: BTreeMap<T, u32>,
}

impl<T: Ord> Default for Multiset<T> {
    fn default() -> Self {
        Multiset {
            counts: BTreeMap::new(),
        }
    }
}

impl<T: Ord + Clone> Multiset<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, item: T) {
        *self.counts.entry(item).or_insert(0) += 1;
    }

    /// Removes one copy; returns false if the item was absent.
    pub fn remove_one(&mut self, item: &T) -> bool {
        match self.counts.get_mut(item) {
            Some(n) if *n > 1 => {
                *n -= 1;
                true
            }
            Some(_) => {
                self.counts.remove(item);
                true
            }
            None => false,
        }
    }

    pub fn contains(&self, item: &T) -> bool {
        self.counts.contains_key(item)
    }

    pub fn count(&self, item: &T) -> u32 {
        self.counts.get(item).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Total number of copies.
    pub fn len(&self) -> usize {
        self.counts.values().map(|n| *n as usize).sum()
    }

    /// Distinct elements in order.
    pub fn distinct(&self) -> impl Iterator<Item = &T> {
        self.counts.keys()
    }

    /// Every copy, in order.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.counts
            .iter()
            .flat_map(|(k, n)| std::iter::repeat_n(k, *n as usize))
    }
}

impl<T: Ord + Clone> FromIterator<T> for Multiset<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut m = Multiset::new();
        for x in iter {
            m.insert(x);
        }
        m
    }
}

// Serialised as a list of `[element, count]` pairs so tuple elements survive JSON.
impl<T: Ord + Serialize> Serialize for Multiset<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.counts.len()))?;
        for pair in &self.counts {
            seq.serialize_element(&pair)?;
        }
        seq.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_copies() {
        let mut m = Multiset::new();
        m.insert(3);
        m.insert(3);
        m.insert(1);
        assert_eq!(m.len(), 3);
        assert_eq!(m.iter().copied().collect::<Vec<_>>(), vec![1, 3, 3]);
        assert!(m.remove_one(&3));
        assert_eq!(m.count(&3), 1);
        assert!(m.remove_one(&3));
        assert!(!m.contains(&3));
        assert!(!m.remove_one(&3));
    }

    proptest! {
        // Insertion order never affects equality.
        #[test]
        fn order_independent(mut xs in proptest::collection::vec(0u8..6, 0..20)) {
            let a: Multiset<u8> = xs.iter().copied().collect();
            xs.reverse();
            let b: Multiset<u8> = xs.iter().copied().collect();
            prop_assert_eq!(a.len(), xs.len());
            prop_assert_eq!(a, b);
        }
    }
}
