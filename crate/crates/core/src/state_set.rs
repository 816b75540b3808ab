use std::fmt;

use crate::StateId;

/// Fixed-capacity bitset over automaton state ids.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct StateSet {
    words: Vec<u64>,
    capacity: usize,
}

impl StateSet {
    pub fn new(capacity: usize) -> Self {
        Self {
            words: vec![0; capacity.div_ceil(64)],
            capacity,
        }
    }

    pub fn from_states(capacity: usize, states: impl IntoIterator<Item = StateId>) -> Self {
        let mut set = Self::new(capacity);
        for q in states {
            set.insert(q);
        }
        set
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn insert(&mut self, q: StateId) -> bool {
        let q = q as usize;
        assert!(q < self.capacity, "state {q} out of range {}", self.capacity);
        let (w, b) = (q / 64, q % 64);
        let fresh = self.words[w] & (1 << b) == 0;
        self.words[w] |= 1 << b;
        fresh
    }

    pub fn contains(&self, q: StateId) -> bool {
        let q = q as usize;
        q < self.capacity && self.words[q / 64] & (1 << (q % 64)) != 0
    }

    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn intersects(&self, other: &StateSet) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .any(|(a, b)| a & b != 0)
    }

    /// Ascending iteration over members.
    pub fn iter(&self) -> impl Iterator<Item = StateId> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros();
                w &= w - 1;
                Some((wi * 64 + bit as usize) as StateId)
            })
        })
    }
}

impl fmt::Debug for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_iter_roundtrip() {
        let set = StateSet::from_states(130, [0, 5, 64, 129]);
        assert_eq!(set.iter().collect::<Vec<_>>(), vec![0, 5, 64, 129]);
        assert_eq!(set.len(), 4);
        assert!(set.contains(64));
        assert!(!set.contains(63));
        assert!(!set.contains(500));
    }

    #[test]
    fn intersects_and_clear() {
        let mut a = StateSet::from_states(10, [1, 2]);
        let b = StateSet::from_states(10, [2, 9]);
        assert!(a.intersects(&b));
        a.clear();
        assert!(a.is_empty());
        assert!(!a.intersects(&b));
    }
}
