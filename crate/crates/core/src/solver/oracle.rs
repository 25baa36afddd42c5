//! Brute-force almost-sure Büchi solver for tiny finite MDPs.
//!
//! Used only to cross-check the fixed-point solvers. It enumerates every
//! stationary deterministic strategy, so it is exponential in the number of
//! states and refuses anything larger than a few states.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use thiserror::Error;

use crate::game::TransitionSystem;
use crate::set::AbstractSet;

pub const ORACLE_MAX_STATES: usize = 10;
pub const ORACLE_MAX_INPUTS: usize = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance too large for the oracle: {states} states, {inputs} inputs")]
    TooLarge { states: usize, inputs: usize },
    #[error("the oracle needs identical relations, they differ at state {state} input {input}")]
    RelationsDiffer { state: usize, input: usize },
}

/// Maximal almost-sure Büchi winning set of `ts` read as an MDP whose
/// successors under `(x, u)` all have positive probability.
pub fn oracle_as_buchi(ts: &TransitionSystem, target: &AbstractSet) -> Result<AbstractSet, OracleError> {
    let n = ts.n_states();
    let m = ts.n_inputs();
    if n > ORACLE_MAX_STATES || m > ORACLE_MAX_INPUTS {
        return Err(OracleError::TooLarge { states: n, inputs: m });
    }
    for x in 0..n {
        for u in 0..m {
            if ts.over(x, u) != ts.under(x, u) {
                return Err(OracleError::RelationsDiffer { state: x, input: u });
            }
        }
    }

    let mut winning = AbstractSet::empty(n);
    let mut strategy = vec![0usize; n];
    loop {
        winning.union_with(&winning_under(ts, &strategy, target));
        // Odometer increment over all strategies.
        let mut i = 0;
        while i < n {
            strategy[i] += 1;
            if strategy[i] < m {
                break;
            }
            strategy[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    Ok(winning)
}

fn winning_under(ts: &TransitionSystem, strategy: &[usize], target: &AbstractSet) -> AbstractSet {
    let n = ts.n_states();
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(n, n * 2);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for (x, &u) in strategy.iter().enumerate() {
        for &y in ts.over(x, u) {
            g.add_edge(nodes[x], nodes[y as usize], ());
        }
    }
    let mut component = vec![0usize; n];
    let sccs = tarjan_scc(&g);
    for (c, scc) in sccs.iter().enumerate() {
        for v in scc {
            component[v.index()] = c;
        }
    }
    // A state with no successors has nowhere to go; treat it as a bottom
    // component of its own, which is losing unless it is a target.
    let mut bad = AbstractSet::empty(n);
    for (c, scc) in sccs.iter().enumerate() {
        let bottom = scc.iter().all(|v| g.neighbors(*v).all(|w| component[w.index()] == c));
        let hits_target = scc.iter().any(|v| target.contains(v.index()));
        if bottom && !hits_target {
            for v in scc {
                bad.insert(v.index());
            }
        }
    }
    // States that can reach a bad bottom component lose.
    let mut losing = bad.clone();
    let mut changed = true;
    while changed {
        changed = false;
        for (x, &u) in strategy.iter().enumerate() {
            if !losing.contains(x) && ts.over(x, u).iter().any(|&y| losing.contains(y as usize)) {
                losing.insert(x);
                changed = true;
            }
        }
    }
    losing.complement()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absorbing_target_wins() {
        let ts = TransitionSystem::from_fn(1, 1, None, |_, _| (vec![0], vec![0])).unwrap();
        let b = AbstractSet::full(1);
        assert_eq!(oracle_as_buchi(&ts, &b).unwrap(), b);
        assert!(oracle_as_buchi(&ts, &AbstractSet::empty(1)).unwrap().is_empty());
    }

    #[test]
    fn two_cell_quotient() {
        let ts = TransitionSystem::from_fn(2, 1, None, |s, _| {
            let succ = if s == 0 { vec![0, 1] } else { vec![1] };
            (succ.clone(), succ)
        })
        .unwrap();
        let b = AbstractSet::from_indices(2, [1]);
        assert_eq!(oracle_as_buchi(&ts, &b).unwrap(), AbstractSet::full(2));
    }

    #[test]
    fn rejects_large_or_uncertain_instances() {
        let big = TransitionSystem::from_fn(11, 1, None, |s, _| (vec![s], vec![s])).unwrap();
        assert!(matches!(
            oracle_as_buchi(&big, &AbstractSet::empty(11)),
            Err(OracleError::TooLarge { .. })
        ));
        let diff = TransitionSystem::from_fn(2, 1, None, |_, _| (vec![0, 1], vec![1])).unwrap();
        assert!(matches!(
            oracle_as_buchi(&diff, &AbstractSet::empty(2)),
            Err(OracleError::RelationsDiffer { .. })
        ));
    }
}
