//! Compact label sets.
//!
//! Rumor sets, in-neighbor sets and gathered component labels are all subsets
//! of `[0, n)`, so they are stored as a growable bitmap. Equality and hashing
//! ignore trailing zero words, which means two sets built with different
//! capacities compare equal whenever they hold the same labels.

use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::Label;

const WORD: usize = 64;

#[derive(Clone, Default)]
pub struct NodeSet {
    words: Vec<u64>,
}

impl NodeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Empty set with room for labels `0..n` without reallocation.
    pub fn with_capacity(n: usize) -> Self {
        Self {
            words: vec![0; n.div_ceil(WORD)],
        }
    }

    pub fn singleton(label: Label) -> Self {
        let mut s = Self::with_capacity(label + 1);
        s.insert(label);
        s
    }

    /// The full universe `[0, n)`.
    pub fn full(n: usize) -> Self {
        let mut s = Self::with_capacity(n);
        for l in 0..n {
            s.insert(l);
        }
        s
    }

    /// Returns `true` if the label was not already present.
    pub fn insert(&mut self, label: Label) -> bool {
        let (w, b) = (label / WORD, label % WORD);
        if w >= self.words.len() {
            self.words.resize(w + 1, 0);
        }
        let mask = 1u64 << b;
        let fresh = self.words[w] & mask == 0;
        self.words[w] |= mask;
        fresh
    }

    pub fn remove(&mut self, label: Label) -> bool {
        let (w, b) = (label / WORD, label % WORD);
        match self.words.get_mut(w) {
            Some(word) => {
                let mask = 1u64 << b;
                let present = *word & mask != 0;
                *word &= !mask;
                present
            }
            None => false,
        }
    }

    #[inline]
    pub fn contains(&self, label: Label) -> bool {
        self.words
            .get(label / WORD)
            .is_some_and(|w| w & (1u64 << (label % WORD)) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// In-place union; returns `true` if any label was added.
    pub fn union_with(&mut self, other: &NodeSet) -> bool {
        if other.words.len() > self.words.len() {
            self.words.resize(other.words.len(), 0);
        }
        let mut changed = false;
        for (a, &b) in self.words.iter_mut().zip(&other.words) {
            let merged = *a | b;
            changed |= merged != *a;
            *a = merged;
        }
        changed
    }

    pub fn is_subset(&self, other: &NodeSet) -> bool {
        self.words
            .iter()
            .enumerate()
            .all(|(i, &w)| w & !other.words.get(i).copied().unwrap_or(0) == 0)
    }

    /// Labels in `self` that are not in `other`.
    pub fn difference(&self, other: &NodeSet) -> NodeSet {
        let words = self
            .words
            .iter()
            .enumerate()
            .map(|(i, &w)| w & !other.words.get(i).copied().unwrap_or(0))
            .collect();
        NodeSet { words }
    }

    pub fn iter(&self) -> impl Iterator<Item = Label> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut word = w;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let bit = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(i * WORD + bit)
            })
        })
    }

    pub fn to_vec(&self) -> Vec<Label> {
        self.iter().collect()
    }

    fn significant(&self) -> &[u64] {
        let end = self
            .words
            .iter()
            .rposition(|&w| w != 0)
            .map_or(0, |i| i + 1);
        &self.words[..end]
    }
}

impl PartialEq for NodeSet {
    fn eq(&self, other: &Self) -> bool {
        self.significant() == other.significant()
    }
}

impl Eq for NodeSet {}

impl Hash for NodeSet {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.significant().hash(state);
    }
}

impl PartialOrd for NodeSet {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for NodeSet {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.iter().cmp(other.iter())
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl FromIterator<Label> for NodeSet {
    fn from_iter<I: IntoIterator<Item = Label>>(iter: I) -> Self {
        let mut s = NodeSet::new();
        for l in iter {
            s.insert(l);
        }
        s
    }
}

impl Extend<Label> for NodeSet {
    fn extend<I: IntoIterator<Item = Label>>(&mut self, iter: I) {
        for l in iter {
            self.insert(l);
        }
    }
}

impl Serialize for NodeSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for NodeSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let labels = Vec::<Label>::deserialize(deserializer)?;
        Ok(labels.into_iter().collect())
    }
}
