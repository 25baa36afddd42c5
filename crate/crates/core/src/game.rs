//! Two-relation transition systems and their predecessor operators.
//!
//! A [`TransitionSystem`] stores, for every (state, input) pair, an
//! over-approximating successor set `F̄` and an under-approximating set `F̲`
//! with `F̲ ⊆ F̄`. Both relations are kept in compressed rows together with
//! their reverse adjacency, so that every operator below runs in time linear
//! in the number of edges.

use thiserror::Error;

use crate::set::AbstractSet;

#[derive(Debug, Error, PartialEq)]
pub enum GameError {
    #[error("successor {target} of ({state}, {input}) is outside 0..{n_states}")]
    TargetOutOfRange {
        state: usize,
        input: usize,
        target: usize,
        n_states: usize,
    },
    #[error("under-successors of ({state}, {input}) are not contained in the over-successors")]
    NotContained { state: usize, input: usize },
    #[error("a transition system needs at least one state and one input")]
    Degenerate,
    #[error("sink state {0} must be absorbing in both relations")]
    SinkNotAbsorbing(usize),
}

/// Which relation an operator quantifies over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    /// `F̄`
    Over,
    /// `F̲`
    Under,
    /// `F̄ ∖ F̲`, only meaningful for cooperative predecessors.
    Difference,
}

/// Compressed sparse rows: row `r` owns `targets[offsets[r]..offsets[r + 1]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Csr {
    fn row(&self, r: usize) -> &[u32] {
        &self.targets[self.offsets[r]..self.offsets[r + 1]]
    }

    fn from_rows<'a, I: Iterator<Item = &'a [u32]>>(rows: I, n_rows_hint: usize) -> Self {
        let mut offsets = Vec::with_capacity(n_rows_hint + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for row in rows {
            targets.extend_from_slice(row);
            offsets.push(targets.len());
        }
        Csr { offsets, targets }
    }

    /// Transposes a pair-indexed relation into state-indexed lists of pairs.
    fn reverse(&self, n_states: usize) -> Self {
        let mut counts = vec![0usize; n_states + 1];
        for &t in &self.targets {
            counts[t as usize + 1] += 1;
        }
        for i in 0..n_states {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut fill = counts;
        let mut targets = vec![0u32; self.targets.len()];
        for pair in 0..self.offsets.len() - 1 {
            for &t in self.row(pair) {
                let slot = &mut fill[t as usize];
                targets[*slot] = pair as u32;
                *slot += 1;
            }
        }
        Csr { offsets, targets }
    }
}

/// Finite abstraction with an over- and an under-approximating transition
/// relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionSystem {
    n_states: usize,
    n_inputs: usize,
    sink: Option<usize>,
    over: Csr,
    under: Csr,
    rev_over: Csr,
    rev_under: Csr,
}

impl TransitionSystem {
    /// Builds a system from per-pair successor lists. Pairs are enumerated
    /// state-major: pair `p` is state `p / n_inputs` under input `p % n_inputs`.
    /// Lists are sorted and deduplicated; `under ⊆ over` is verified.
    pub fn from_pairs(
        n_states: usize,
        n_inputs: usize,
        sink: Option<usize>,
        mut pairs: Vec<(Vec<u32>, Vec<u32>)>,
    ) -> Result<Self, GameError> {
        if n_states == 0 || n_inputs == 0 {
            return Err(GameError::Degenerate);
        }
        assert_eq!(pairs.len(), n_states * n_inputs, "one entry per (state, input)");
        for (p, (over, under)) in pairs.iter_mut().enumerate() {
            let (state, input) = (p / n_inputs, p % n_inputs);
            for list in [&mut *over, &mut *under] {
                list.sort_unstable();
                list.dedup();
                if let Some(&t) = list.last() {
                    if t as usize >= n_states {
                        return Err(GameError::TargetOutOfRange {
                            state,
                            input,
                            target: t as usize,
                            n_states,
                        });
                    }
                }
            }
            if !sorted_subset(under, over) {
                return Err(GameError::NotContained { state, input });
            }
            if Some(state) == sink && (over.as_slice() != [state as u32] || under.as_slice() != [state as u32]) {
                return Err(GameError::SinkNotAbsorbing(state));
            }
        }
        let over = Csr::from_rows(pairs.iter().map(|(o, _)| o.as_slice()), pairs.len());
        let under = Csr::from_rows(pairs.iter().map(|(_, u)| u.as_slice()), pairs.len());
        Ok(Self::from_csr(n_states, n_inputs, sink, over, under))
    }

    /// Convenience constructor from a closure returning `(F̄, F̲)` per pair.
    pub fn from_fn<F>(n_states: usize, n_inputs: usize, sink: Option<usize>, mut f: F) -> Result<Self, GameError>
    where
        F: FnMut(usize, usize) -> (Vec<usize>, Vec<usize>),
    {
        let mut pairs = Vec::with_capacity(n_states * n_inputs);
        for s in 0..n_states {
            for u in 0..n_inputs {
                let (o, un) = f(s, u);
                pairs.push((
                    o.into_iter().map(|x| x as u32).collect(),
                    un.into_iter().map(|x| x as u32).collect(),
                ));
            }
        }
        Self::from_pairs(n_states, n_inputs, sink, pairs)
    }

    fn from_csr(n_states: usize, n_inputs: usize, sink: Option<usize>, over: Csr, under: Csr) -> Self {
        let rev_over = over.reverse(n_states);
        let rev_under = under.reverse(n_states);
        Self {
            n_states,
            n_inputs,
            sink,
            over,
            under,
            rev_over,
            rev_under,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_inputs
    }

    pub fn sink(&self) -> Option<usize> {
        self.sink
    }

    pub fn edge_count(&self, rel: Relation) -> usize {
        match rel {
            Relation::Over => self.over.targets.len(),
            Relation::Under => self.under.targets.len(),
            Relation::Difference => self.over.targets.len() - self.under.targets.len(),
        }
    }

    #[inline]
    pub fn pair(&self, state: usize, input: usize) -> usize {
        state * self.n_inputs + input
    }

    #[inline]
    pub fn pair_state(&self, pair: usize) -> usize {
        pair / self.n_inputs
    }

    #[inline]
    pub fn over(&self, state: usize, input: usize) -> &[u32] {
        self.over.row(self.pair(state, input))
    }

    #[inline]
    pub fn under(&self, state: usize, input: usize) -> &[u32] {
        self.under.row(self.pair(state, input))
    }

    #[inline]
    pub(crate) fn over_of_pair(&self, pair: usize) -> &[u32] {
        self.over.row(pair)
    }

    #[inline]
    pub(crate) fn under_of_pair(&self, pair: usize) -> &[u32] {
        self.under.row(pair)
    }

    /// Pairs `(x, u)` with `target ∈ F̄(x, u)`.
    #[inline]
    pub(crate) fn over_predecessors(&self, target: usize) -> &[u32] {
        self.rev_over.row(target)
    }

    /// Pairs `(x, u)` with `target ∈ F̲(x, u)`.
    #[inline]
    pub(crate) fn under_predecessors(&self, target: usize) -> &[u32] {
        self.rev_under.row(target)
    }

    /// Successors of `(state, input)` in the given relation, ascending.
    pub fn successors(&self, rel: Relation, state: usize, input: usize) -> Vec<usize> {
        let over = self.over(state, input);
        let under = self.under(state, input);
        match rel {
            Relation::Over => over.iter().map(|&t| t as usize).collect(),
            Relation::Under => under.iter().map(|&t| t as usize).collect(),
            Relation::Difference => over
                .iter()
                .filter(|t| under.binary_search(t).is_err())
                .map(|&t| t as usize)
                .collect(),
        }
    }

    pub fn full_set(&self) -> AbstractSet {
        AbstractSet::full(self.n_states)
    }

    pub fn empty_set(&self) -> AbstractSet {
        AbstractSet::empty(self.n_states)
    }

    /// Controllable predecessor: `{x | ∃u. rel(x, u) ⊆ t}`. An empty image
    /// is vacuously contained.
    pub fn cpre(&self, rel: Relation, t: &AbstractSet) -> AbstractSet {
        let rows = match rel {
            Relation::Over => &self.over,
            Relation::Under => &self.under,
            Relation::Difference => panic!("cpre is defined for F̄ and F̲ only"),
        };
        let mut out = self.empty_set();
        for x in 0..self.n_states {
            let hit = (0..self.n_inputs).any(|u| rows.row(self.pair(x, u)).iter().all(|&s| t.contains(s as usize)));
            if hit {
                out.insert(x);
            }
        }
        out
    }

    /// Cooperative predecessor: `{x | ∃u. rel(x, u) ∩ t ≠ ∅}`.
    pub fn pre(&self, rel: Relation, t: &AbstractSet) -> AbstractSet {
        let mut out = self.empty_set();
        for target in t.iter() {
            match rel {
                Relation::Over => {
                    for &p in self.over_predecessors(target) {
                        out.insert(self.pair_state(p as usize));
                    }
                }
                Relation::Under => {
                    for &p in self.under_predecessors(target) {
                        out.insert(self.pair_state(p as usize));
                    }
                }
                Relation::Difference => {
                    for &p in self.over_predecessors(target) {
                        let under = self.under_of_pair(p as usize);
                        if under.binary_search(&(target as u32)).is_err() {
                            out.insert(self.pair_state(p as usize));
                        }
                    }
                }
            }
        }
        out
    }

    /// Almost-sure predecessor: `{x | ∃u. F̄(x,u) ⊆ y ∧ F̲(x,u) ∩ z ≠ ∅}`.
    pub fn apre(&self, y: &AbstractSet, z: &AbstractSet) -> AbstractSet {
        let mut out = self.empty_set();
        for x in 0..self.n_states {
            let hit = (0..self.n_inputs).any(|u| {
                let p = self.pair(x, u);
                self.over.row(p).iter().all(|&s| y.contains(s as usize))
                    && self.under.row(p).iter().any(|&s| z.contains(s as usize))
            });
            if hit {
                out.insert(x);
            }
        }
        out
    }

    /// Uncertain predecessor: `{x | ∃u. F̲(x,u) ⊆ y ∧ F̄(x,u) ∩ z ≠ ∅}`.
    pub fn upre(&self, y: &AbstractSet, z: &AbstractSet) -> AbstractSet {
        let mut out = self.empty_set();
        for x in 0..self.n_states {
            let hit = (0..self.n_inputs).any(|u| {
                let p = self.pair(x, u);
                self.under.row(p).iter().all(|&s| y.contains(s as usize))
                    && self.over.row(p).iter().any(|&s| z.contains(s as usize))
            });
            if hit {
                out.insert(x);
            }
        }
        out
    }
}

fn sorted_subset(small: &[u32], big: &[u32]) -> bool {
    let mut j = 0;
    for &x in small {
        while j < big.len() && big[j] < x {
            j += 1;
        }
        if j == big.len() || big[j] != x {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    /// q0 --u1--> q1, q1 --u0--> q1, q0 --u0--> {q0, q1}, q1 --u1--> q0.
    fn two_state() -> TransitionSystem {
        TransitionSystem::from_fn(2, 2, None, |s, u| {
            let over = match (s, u) {
                (0, 0) => vec![0, 1],
                (0, 1) => vec![1],
                (1, 0) => vec![1],
                _ => vec![0],
            };
            (over.clone(), over)
        })
        .unwrap()
    }

    #[test]
    fn cpre_examples() {
        let ts = two_state();
        let q1 = AbstractSet::from_indices(2, [1]);
        assert_eq!(ts.cpre(Relation::Over, &q1), ts.full_set());
        assert!(ts.cpre(Relation::Over, &ts.empty_set()).is_empty());
        assert_eq!(ts.cpre(Relation::Over, &ts.full_set()), ts.full_set());
    }

    #[test]
    fn pre_of_empty_is_empty() {
        let ts = two_state();
        for rel in [Relation::Over, Relation::Under, Relation::Difference] {
            assert!(ts.pre(rel, &ts.empty_set()).is_empty());
        }
    }

    #[test]
    fn apre_upre_with_empty_progress_set() {
        let ts = two_state();
        let full = ts.full_set();
        assert!(ts.apre(&full, &ts.empty_set()).is_empty());
        assert!(ts.upre(&full, &ts.empty_set()).is_empty());
        assert_eq!(ts.upre(&full, &full), full);
    }

    #[test]
    fn containment_is_enforced() {
        let err = TransitionSystem::from_fn(2, 1, None, |s, _| (vec![s], vec![0, 1])).unwrap_err();
        assert!(matches!(err, GameError::NotContained { .. }));
    }

    #[test]
    fn sink_must_be_absorbing() {
        let err = TransitionSystem::from_fn(2, 1, Some(1), |_, _| (vec![0, 1], vec![])).unwrap_err();
        assert_eq!(err, GameError::SinkNotAbsorbing(1));
    }

    #[test]
    fn empty_under_image_is_vacuous_for_cpre() {
        let ts = TransitionSystem::from_fn(2, 1, None, |s, _| {
            if s == 0 {
                (vec![0, 1], vec![])
            } else {
                (vec![1], vec![1])
            }
        })
        .unwrap();
        let none = ts.empty_set();
        assert!(ts.cpre(Relation::Under, &none).contains(0));
        assert!(!ts.cpre(Relation::Under, &none).contains(1));
        // F̲(0) = ∅ never meets z, so the almost-sure predecessor excludes it.
        assert!(!ts.apre(&ts.full_set(), &ts.full_set()).contains(0));
        let diff = ts.pre(Relation::Difference, &AbstractSet::from_indices(2, [1]));
        assert_eq!(diff, AbstractSet::from_indices(2, [0]));
    }
}
