//! Dense sets of abstract states.
//!
//! Every fixed point in the solver manipulates subsets of a fixed universe
//! `0..n_states`. When the universe contains the sink state it is the last
//! index, so ascending iteration visits it last.

use std::fmt;

use fixedbitset::FixedBitSet;

/// A subset of the abstract state space `0..universe`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct AbstractSet {
    bits: FixedBitSet,
}

impl AbstractSet {
    pub fn empty(universe: usize) -> Self {
        Self {
            bits: FixedBitSet::with_capacity(universe),
        }
    }

    pub fn full(universe: usize) -> Self {
        let mut bits = FixedBitSet::with_capacity(universe);
        bits.insert_range(..);
        Self { bits }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(universe: usize, indices: I) -> Self {
        let mut set = Self::empty(universe);
        for i in indices {
            set.insert(i);
        }
        set
    }

    /// Size of the universe this set lives in (not the cardinality).
    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn is_full(&self) -> bool {
        self.bits.is_full()
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.bits.contains(i)
    }

    /// Inserts `i`, returning `true` when it was not already present.
    #[inline]
    pub fn insert(&mut self, i: usize) -> bool {
        !self.bits.put(i)
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        self.bits.set(i, false);
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones()
    }

    pub fn union_with(&mut self, other: &AbstractSet) {
        self.check_universe(other);
        self.bits.union_with(&other.bits);
    }

    pub fn intersect_with(&mut self, other: &AbstractSet) {
        self.check_universe(other);
        self.bits.intersect_with(&other.bits);
    }

    pub fn difference_with(&mut self, other: &AbstractSet) {
        self.check_universe(other);
        self.bits.difference_with(&other.bits);
    }

    pub fn union(&self, other: &AbstractSet) -> AbstractSet {
        let mut out = self.clone();
        out.union_with(other);
        out
    }

    pub fn intersection(&self, other: &AbstractSet) -> AbstractSet {
        let mut out = self.clone();
        out.intersect_with(other);
        out
    }

    pub fn difference(&self, other: &AbstractSet) -> AbstractSet {
        let mut out = self.clone();
        out.difference_with(other);
        out
    }

    pub fn complement(&self) -> AbstractSet {
        let mut bits = self.bits.clone();
        bits.toggle_range(..);
        AbstractSet { bits }
    }

    pub fn is_subset(&self, other: &AbstractSet) -> bool {
        self.check_universe(other);
        self.bits.is_subset(&other.bits)
    }

    pub fn is_disjoint(&self, other: &AbstractSet) -> bool {
        self.check_universe(other);
        self.bits.is_disjoint(&other.bits)
    }

    fn check_universe(&self, other: &AbstractSet) {
        assert_eq!(
            self.universe(),
            other.universe(),
            "abstract sets over different universes"
        );
    }
}

impl fmt::Debug for AbstractSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basic_membership() {
        let mut s = AbstractSet::empty(5);
        assert!(s.is_empty());
        assert!(s.insert(3));
        assert!(!s.insert(3));
        assert!(s.contains(3));
        assert_eq!(s.len(), 1);
        s.remove(3);
        assert!(s.is_empty());
        assert!(AbstractSet::full(5).is_full());
        assert_eq!(AbstractSet::full(5).len(), 5);
    }

    #[test]
    fn iteration_is_ascending() {
        let s = AbstractSet::from_indices(10, [9, 2, 5, 0]);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 2, 5, 9]);
    }

    fn arb_set(universe: usize) -> impl Strategy<Value = AbstractSet> {
        proptest::collection::vec(any::<bool>(), universe).prop_map(move |bits| {
            AbstractSet::from_indices(universe, bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i))
        })
    }

    proptest! {
        #[test]
        fn de_morgan(a in arb_set(37), b in arb_set(37)) {
            prop_assert_eq!(a.union(&b).complement(), a.complement().intersection(&b.complement()));
            prop_assert_eq!(a.intersection(&b).complement(), a.complement().union(&b.complement()));
        }

        #[test]
        fn difference_and_subset(a in arb_set(70), b in arb_set(70)) {
            let d = a.difference(&b);
            prop_assert!(d.is_subset(&a));
            prop_assert!(d.is_disjoint(&b));
            prop_assert_eq!(d.union(&a.intersection(&b)), a.clone());
            prop_assert_eq!(a.len() + a.complement().len(), 70);
        }
    }
}
