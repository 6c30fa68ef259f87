/// Set of small indices. Trailing zero words are always trimmed so that
/// derived equality, ordering and hashing are by content.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    pub fn new(nbits: usize) -> Self {
        BitSet { words: Vec::with_capacity(nbits.div_ceil(64)) }
    }

    fn trimmed(mut self) -> Self {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
        self
    }

    pub fn from_indices(nbits: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut s = BitSet::new(nbits);
        for i in idx {
            s.insert(i);
        }
        s
    }

    pub fn insert(&mut self, i: usize) {
        let w = i / 64;
        if w >= self.words.len() {
            self.words.resize(w + 1, 0);
        }
        self.words[w] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        if let Some(w) = self.words.get_mut(i / 64) {
            *w &= !(1 << (i % 64));
        }
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words.get(i / 64).is_some_and(|w| w & (1 << (i % 64)) != 0)
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn word(&self, k: usize) -> u64 {
        self.words.get(k).copied().unwrap_or(0)
    }

    pub fn is_subset(&self, other: &BitSet) -> bool {
        (0..self.words.len()).all(|k| self.words[k] & !other.word(k) == 0)
    }

    pub fn intersection(&self, other: &BitSet) -> BitSet {
        let n = self.words.len().max(other.words.len());
        BitSet { words: (0..n).map(|k| self.word(k) & other.word(k)).collect() }.trimmed()
    }

    pub fn union(&self, other: &BitSet) -> BitSet {
        let n = self.words.len().max(other.words.len());
        BitSet { words: (0..n).map(|k| self.word(k) | other.word(k)).collect() }.trimmed()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            (0..64).filter(move |b| w & (1 << b) != 0).map(move |b| k * 64 + b)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_operations() {
        let a = BitSet::from_indices(70, [1, 65]);
        let b = BitSet::from_indices(70, [1, 2, 65]);
        assert!(a.is_subset(&b));
        assert!(!b.is_subset(&a));
        assert_eq!(a.intersection(&b), a);
        assert_eq!(b.iter().collect::<Vec<_>>(), vec![1, 2, 65]);
        assert_eq!(b.count(), 3);
        let c = BitSet::from_indices(70, [65]);
        assert_eq!(c.intersection(&BitSet::from_indices(3, [1])), BitSet::default());
    }
}
