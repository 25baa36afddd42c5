//! Nested fixed points over a two-relation abstraction.
//!
//! * [`buchi_under`]: `νY.μZ.(B̲ᶜ ∩ (Apre(Y,Z) ∪ Cpre_F̄(Z))) ∪ (B̲ ∩ Cpre_F̄(Y))`,
//!   together with the abstract controller extracted round by round.
//! * [`buchi_over`]: `νY.μZ.(B̄ᶜ ∩ Upre(Y,Z)) ∪ (B̄ ∩ (Cpre_F̲(Y) ∪ Pre_{F̄∖F̲}(Y)))`.
//! * [`as_reach`]: almost-sure reachability, `νY.μZ.(B̲ᶜ ∩ (Apre(Y,Z) ∪ Cpre_F̄(Z))) ∪ B̲`.
//! * [`losing_over`]: `[μX.Pre_F̲(X) ∪ W̲]ᶜ`.
//! * [`worst_case_buchi`]: the adversarial Büchi game on `F̄` alone.
//!
//! The inner least fixed points are evaluated incrementally: per
//! (state, input) pair we keep the number of `F̄`-successors still outside
//! `Z` and whether some `F̲`-successor is already in `Z`, and only the states
//! added in the previous round are propagated through the reverse
//! adjacency. Rounds are kept synchronous, so the sequence of sets `Z_k` is
//! exactly the one produced by naive iteration `Z_k = f(Z_{k-1})`, which
//! makes the controller choice reproducible.

mod oracle;

use std::time::Duration;

use log::{debug, warn};
use thiserror::Error;

use crate::game::{Relation, TransitionSystem};
use crate::grid::{Grid, GridError, HyperRect, ALIGN_TOL};
use crate::set::AbstractSet;

pub use oracle::{oracle_as_buchi, OracleError, ORACLE_MAX_INPUTS, ORACLE_MAX_STATES};

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("target dimension {found} does not match grid dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("controller check failed at state {state}: input {input} can leave the winning region")]
    ControllerCheck { state: usize, input: usize },
}

/// Partial map from abstract states to input indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Controller {
    inputs: Vec<Option<u32>>,
}

impl Controller {
    pub fn empty(n_states: usize) -> Self {
        Self {
            inputs: vec![None; n_states],
        }
    }

    pub fn n_states(&self) -> usize {
        self.inputs.len()
    }

    pub fn get(&self, state: usize) -> Option<usize> {
        self.inputs.get(state).copied().flatten().map(|u| u as usize)
    }

    pub fn set(&mut self, state: usize, input: usize) {
        self.inputs[state] = Some(input as u32);
    }

    pub fn clear(&mut self, state: usize) {
        self.inputs[state] = None;
    }

    pub fn domain(&self) -> AbstractSet {
        AbstractSet::from_indices(
            self.inputs.len(),
            self.inputs
                .iter()
                .enumerate()
                .filter(|(_, u)| u.is_some())
                .map(|(i, _)| i),
        )
    }

    pub fn len(&self) -> usize {
        self.inputs.iter().filter(|u| u.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(state, input)` pairs in ascending state order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.inputs
            .iter()
            .enumerate()
            .filter_map(|(s, u)| u.map(|u| (s, u as usize)))
    }
}

/// Iteration counts of one nested fixed point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FixpointStats {
    /// Passes of the outer greatest fixed point.
    pub outer: usize,
    /// Rounds of the inner least fixed points, summed over all outer passes.
    pub inner: usize,
}

/// Everything a full synthesis run produces.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub under: Option<AbstractSet>,
    pub over: Option<AbstractSet>,
    pub losing: Option<AbstractSet>,
    pub worst_case: Option<AbstractSet>,
    pub controller: Option<Controller>,
    pub under_stats: FixpointStats,
    pub over_stats: FixpointStats,
    pub worst_case_stats: FixpointStats,
    pub abstraction_time: Duration,
    pub over_time: Duration,
    pub under_time: Duration,
    pub worst_case_time: Duration,
    pub losing_time: Duration,
}

impl Default for SolveReport {
    fn default() -> Self {
        Self {
            under: None,
            over: None,
            losing: None,
            worst_case: None,
            controller: None,
            under_stats: FixpointStats::default(),
            over_stats: FixpointStats::default(),
            worst_case_stats: FixpointStats::default(),
            abstraction_time: Duration::ZERO,
            over_time: Duration::ZERO,
            under_time: Duration::ZERO,
            worst_case_time: Duration::ZERO,
            losing_time: Duration::ZERO,
        }
    }
}

/// Cells fully inside `target` (`B̲`) and cells meeting it (`B̄`).
///
/// Cells that only touch `target` along a face are not counted in `B̄`;
/// obstacle cells and the sink are in neither set.
pub fn target_sets(g: &Grid, target: &HyperRect) -> Result<(AbstractSet, AbstractSet), SolverError> {
    if target.dim() != g.dim() {
        return Err(SolverError::DimensionMismatch {
            expected: g.dim(),
            found: target.dim(),
        });
    }
    if target.is_empty() || !g.region_contains_box(target) {
        return Err(GridError::OutsideRegion(target.clone()).into());
    }
    let mut under = AbstractSet::empty(g.state_count());
    let mut over = AbstractSet::empty(g.state_count());
    for c in 0..g.cell_count() {
        if g.is_blocked(c) {
            continue;
        }
        let cell = g.cell_box_unchecked(c);
        let mut inside = true;
        let mut overlaps = true;
        for d in 0..g.dim() {
            let tol = ALIGN_TOL * g.widths()[d];
            let (a, b) = (cell.lo()[d], cell.hi()[d]);
            let (lo, hi) = (target.lo()[d], target.hi()[d]);
            inside &= a >= lo - tol && b <= hi + tol;
            overlaps &= a < hi - tol && b > lo + tol;
        }
        if inside {
            under.insert(c);
        }
        if overlaps {
            over.insert(c);
        }
    }
    if under.is_empty() {
        warn!("no cell lies inside the target {target}; the under-approximation will be empty");
    }
    Ok((under, over))
}

/// Parameters of one almost-sure attractor computation
/// `μZ.(Eᶜ ∩ (Apre(Y,Z) ∪ Cpre_F̄(Z))) ∪ base`.
struct Attractor<'a> {
    /// Safety set for the `Apre` conjunct `F̄ ⊆ Y`.
    safe_in: &'a AbstractSet,
    /// Added unconditionally in the first round.
    base: AbstractSet,
    /// States that may enter only through `base`.
    excluded: &'a AbstractSet,
    /// Disable to get the plain `Cpre_F̄` attractor.
    use_apre: bool,
    track_controller: bool,
}

struct AttractorResult {
    set: AbstractSet,
    controller: Controller,
    rounds: usize,
}

fn attractor(ts: &TransitionSystem, spec: Attractor<'_>) -> AttractorResult {
    let n_pairs = ts.n_pairs();
    let n_inputs = ts.n_inputs();
    let mut missing: Vec<u32> = (0..n_pairs).map(|p| ts.over_of_pair(p).len() as u32).collect();
    let safe: Vec<bool> = if spec.use_apre {
        (0..n_pairs)
            .map(|p| ts.over_of_pair(p).iter().all(|&s| spec.safe_in.contains(s as usize)))
            .collect()
    } else {
        vec![false; n_pairs]
    };
    let mut hit = vec![false; n_pairs];
    let mut z = ts.empty_set();
    let mut controller = Controller::empty(ts.n_states());

    // Z_1 = f(∅): the base plus states with an input whose F̄-image is empty.
    let mut frontier: Vec<usize> = Vec::new();
    for x in spec.base.iter() {
        z.insert(x);
        frontier.push(x);
    }
    for x in 0..ts.n_states() {
        if z.contains(x) || spec.excluded.contains(x) {
            continue;
        }
        if (0..n_inputs).any(|u| missing[ts.pair(x, u)] == 0) {
            z.insert(x);
            frontier.push(x);
        }
    }
    let choose = |x: usize, missing: &[u32], hit: &[bool], controller: &mut Controller| {
        let base = x * n_inputs;
        let sure = (0..n_inputs).find(|&u| missing[base + u] == 0);
        let progress = || (0..n_inputs).find(|&u| safe[base + u] && hit[base + u]);
        let u = sure
            .or_else(progress)
            .expect("a newly added state has a qualifying input");
        controller.set(x, u);
    };
    if spec.track_controller {
        for &x in &frontier {
            if !spec.excluded.contains(x) {
                choose(x, &missing, &hit, &mut controller);
            }
        }
    }
    let mut rounds = usize::from(!frontier.is_empty());

    let mut next: Vec<usize> = Vec::new();
    while !frontier.is_empty() {
        for &t in &frontier {
            for &p in ts.over_predecessors(t) {
                let p = p as usize;
                missing[p] -= 1;
                let x = ts.pair_state(p);
                if missing[p] == 0 && !z.contains(x) && !spec.excluded.contains(x) {
                    z.insert(x);
                    next.push(x);
                }
            }
            if spec.use_apre {
                for &p in ts.under_predecessors(t) {
                    let p = p as usize;
                    hit[p] = true;
                    let x = ts.pair_state(p);
                    if safe[p] && !z.contains(x) && !spec.excluded.contains(x) {
                        z.insert(x);
                        next.push(x);
                    }
                }
            }
        }
        // Counters now describe exactly Z_{k-1}; the states in `next` are Z_k ∖ Z_{k-1}.
        if spec.track_controller {
            for &x in &next {
                choose(x, &missing, &hit, &mut controller);
            }
        }
        if !next.is_empty() {
            rounds += 1;
        }
        std::mem::swap(&mut frontier, &mut next);
        next.clear();
    }
    AttractorResult {
        set: z,
        controller,
        rounds,
    }
}

/// Almost-sure reachability of `b_under`.
pub fn as_reach(ts: &TransitionSystem, b_under: &AbstractSet) -> AbstractSet {
    as_reach_with_stats(ts, b_under).0
}

pub fn as_reach_with_stats(ts: &TransitionSystem, b_under: &AbstractSet) -> (AbstractSet, FixpointStats) {
    let mut y = ts.full_set();
    let mut stats = FixpointStats::default();
    loop {
        stats.outer += 1;
        let res = attractor(
            ts,
            Attractor {
                safe_in: &y,
                base: b_under.clone(),
                excluded: b_under,
                use_apre: true,
                track_controller: false,
            },
        );
        stats.inner += res.rounds;
        let mut z = res.set;
        z.intersect_with(&y);
        if z == y {
            return (y, stats);
        }
        y = z;
    }
}

/// Under-approximation `W̲` of the almost-sure Büchi winning region and the
/// abstract controller.
///
/// `warm_start`, when given, must contain `W̲` (the over-approximation
/// `W̄` does). Each outer pass intersects with the previous `Y`, which keeps
/// the iteration decreasing from any such start and is a no-op from the full
/// set.
pub fn buchi_under(
    ts: &TransitionSystem,
    b_under: &AbstractSet,
    warm_start: Option<&AbstractSet>,
) -> Result<(AbstractSet, Controller, FixpointStats), SolverError> {
    let mut y = warm_start.cloned().unwrap_or_else(|| ts.full_set());
    let mut stats = FixpointStats::default();
    let mut controller;
    loop {
        stats.outer += 1;
        let mut base = ts.cpre(Relation::Over, &y);
        base.intersect_with(b_under);
        let res = attractor(
            ts,
            Attractor {
                safe_in: &y,
                base,
                excluded: b_under,
                use_apre: true,
                track_controller: true,
            },
        );
        stats.inner += res.rounds;
        controller = res.controller;
        let mut z = res.set;
        z.intersect_with(&y);
        debug!("buchi_under pass {}: |Y| = {} -> {}", stats.outer, y.len(), z.len());
        if z == y {
            break;
        }
        y = z;
    }
    let winning = y;
    for s in 0..ts.n_states() {
        if !winning.contains(s) {
            controller.clear(s);
        }
    }
    for x in winning.intersection(b_under).iter() {
        let u = (0..ts.n_inputs())
            .find(|&u| ts.over(x, u).iter().all(|&s| winning.contains(s as usize)))
            .expect("target states in the winning region have a safe input");
        controller.set(x, u);
    }
    verify_controller(ts, &winning, &controller)?;
    Ok((winning, controller, stats))
}

/// Re-checks that every assigned input keeps all `F̄`-successors inside
/// `winning` and that the controller is defined exactly on `winning`.
pub fn verify_controller(
    ts: &TransitionSystem,
    winning: &AbstractSet,
    controller: &Controller,
) -> Result<(), SolverError> {
    for x in winning.iter() {
        let Some(u) = controller.get(x) else {
            return Err(SolverError::ControllerCheck {
                state: x,
                input: usize::MAX,
            });
        };
        if !ts.over(x, u).iter().all(|&s| winning.contains(s as usize)) {
            return Err(SolverError::ControllerCheck { state: x, input: u });
        }
    }
    if let Some((state, input)) = controller.entries().find(|(s, _)| !winning.contains(*s)) {
        return Err(SolverError::ControllerCheck { state, input });
    }
    Ok(())
}

/// Over-approximation `W̄` of the almost-sure Büchi winning region.
pub fn buchi_over(ts: &TransitionSystem, b_over: &AbstractSet) -> (AbstractSet, FixpointStats) {
    let n_pairs = ts.n_pairs();
    let mut y = ts.full_set();
    let mut stats = FixpointStats::default();
    loop {
        stats.outer += 1;
        let under_safe: Vec<bool> = (0..n_pairs)
            .map(|p| ts.under_of_pair(p).iter().all(|&s| y.contains(s as usize)))
            .collect();
        let mut base = ts.cpre(Relation::Under, &y);
        base.union_with(&ts.pre(Relation::Difference, &y));
        base.intersect_with(b_over);

        let mut z = base.clone();
        let mut frontier: Vec<usize> = base.iter().collect();
        let mut next = Vec::new();
        stats.inner += usize::from(!frontier.is_empty());
        while !frontier.is_empty() {
            for &t in &frontier {
                for &p in ts.over_predecessors(t) {
                    let p = p as usize;
                    let x = ts.pair_state(p);
                    if under_safe[p] && !z.contains(x) && !b_over.contains(x) {
                        z.insert(x);
                        next.push(x);
                    }
                }
            }
            if !next.is_empty() {
                stats.inner += 1;
            }
            std::mem::swap(&mut frontier, &mut next);
            next.clear();
        }
        z.intersect_with(&y);
        debug!("buchi_over pass {}: |Y| = {} -> {}", stats.outer, y.len(), z.len());
        if z == y {
            return (y, stats);
        }
        y = z;
    }
}

/// Over-approximation of the region from which `winning` cannot be reached
/// with positive probability: `[μX.Pre_F̲(X) ∪ W̲]ᶜ`.
pub fn losing_over(ts: &TransitionSystem, winning: &AbstractSet) -> AbstractSet {
    let mut reach = winning.clone();
    let mut stack: Vec<usize> = winning.iter().collect();
    while let Some(t) = stack.pop() {
        for &p in ts.under_predecessors(t) {
            let x = ts.pair_state(p as usize);
            if reach.insert(x) {
                stack.push(x);
            }
        }
    }
    reach.complement()
}

/// Classical Büchi game in which the noise is an unrestricted adversary on
/// `F̄`: `νY.μZ.(B̲ ∩ Cpre_F̄(Y)) ∪ (B̲ᶜ ∩ Cpre_F̄(Z))`.
pub fn worst_case_buchi(ts: &TransitionSystem, b_under: &AbstractSet) -> (AbstractSet, FixpointStats) {
    let mut y = ts.full_set();
    let mut stats = FixpointStats::default();
    loop {
        stats.outer += 1;
        let mut base = ts.cpre(Relation::Over, &y);
        base.intersect_with(b_under);
        let res = attractor(
            ts,
            Attractor {
                safe_in: &y,
                base,
                excluded: b_under,
                use_apre: false,
                track_controller: false,
            },
        );
        stats.inner += res.rounds;
        let mut z = res.set;
        z.intersect_with(&y);
        if z == y {
            return (y, stats);
        }
        y = z;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    /// Abstraction of the two-cell chain whose escape probability from
    /// [0,1) is bounded below: both relations equal {[0,1), [1,2]} from
    /// cell 0 and {[1,2]} from cell 1.
    fn escape_chain() -> TransitionSystem {
        TransitionSystem::from_fn(2, 1, None, |s, _| {
            let succ = if s == 0 { vec![0, 1] } else { vec![1] };
            (succ.clone(), succ)
        })
        .unwrap()
    }

    /// Same chain with no uniform bound: F̲([0,1)) = ∅.
    fn trapping_chain() -> TransitionSystem {
        TransitionSystem::from_fn(2, 1, None, |s, _| {
            if s == 0 {
                (vec![0, 1], vec![])
            } else {
                (vec![1], vec![1])
            }
        })
        .unwrap()
    }

    fn set(ix: &[usize]) -> AbstractSet {
        AbstractSet::from_indices(2, ix.iter().copied())
    }

    #[test]
    fn as_reach_fixtures() {
        assert_eq!(as_reach(&escape_chain(), &set(&[1])), set(&[0, 1]));
        assert_eq!(as_reach(&trapping_chain(), &set(&[1])), set(&[1]));
        assert_eq!(as_reach(&escape_chain(), &set(&[0, 1])), set(&[0, 1]));
    }

    #[test]
    fn buchi_under_fixtures() {
        let (w, c, _) = buchi_under(&escape_chain(), &set(&[1]), None).unwrap();
        assert_eq!(w, set(&[0, 1]));
        assert_eq!(c.get(0), Some(0));
        assert_eq!(c.get(1), Some(0));
        let (w, c, _) = buchi_under(&trapping_chain(), &set(&[0]), None).unwrap();
        assert!(w.is_empty());
        assert!(c.is_empty());
        let (w, c, _) = buchi_under(&escape_chain(), &set(&[]), None).unwrap();
        assert!(w.is_empty() && c.is_empty());
    }

    #[test]
    fn buchi_over_fixtures() {
        assert_eq!(buchi_over(&escape_chain(), &set(&[1])).0, set(&[0, 1]));
        assert!(buchi_over(&escape_chain(), &set(&[])).0.is_empty());
    }

    #[test]
    fn losing_fixtures() {
        let ts = escape_chain();
        assert!(losing_over(&ts, &ts.full_set()).is_empty());
        assert!(losing_over(&ts, &set(&[0, 1])).is_empty());
        let trap = trapping_chain();
        assert_eq!(losing_over(&trap, &set(&[])), trap.full_set());
    }

    #[test]
    fn worst_case_excludes_looping_cell() {
        assert_eq!(worst_case_buchi(&escape_chain(), &set(&[1])).0, set(&[1]));
    }

    #[test]
    fn target_sets_alignment() {
        let g = Grid::new(
            HyperRect::new(vec![0.0], vec![2.0]).unwrap(),
            vec![1.0],
            vec![false],
            vec![],
        )
        .unwrap();
        let (bu, bo) = target_sets(&g, &HyperRect::new(vec![0.0], vec![1.0]).unwrap()).unwrap();
        assert_eq!(bu, bo);
        assert_eq!(bu, AbstractSet::from_indices(3, [0]));
        let (bu, bo) = target_sets(&g, &HyperRect::new(vec![1.2], vec![1.7]).unwrap()).unwrap();
        assert!(bu.is_empty());
        assert_eq!(bo, AbstractSet::from_indices(3, [1]));
        assert!(target_sets(&g, &HyperRect::new(vec![1.5], vec![2.5]).unwrap()).is_err());
    }

    #[test]
    fn controller_check_detects_unsafe_input() {
        let ts = escape_chain();
        let mut c = Controller::empty(2);
        c.set(1, 0);
        assert!(verify_controller(&ts, &set(&[1]), &c).is_ok());
        assert!(verify_controller(&ts, &set(&[0]), &c).is_err());
    }
}
