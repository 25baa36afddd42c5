//! Random two-relation systems and textbook fixed-point iterations written
//! directly from the operator definitions.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stochabs_core::{AbstractSet, Relation, TransitionSystem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn set(universe: usize, items: &[usize]) -> AbstractSet {
    AbstractSet::from_indices(universe, items.iter().copied())
}

pub fn random_subset<R: Rng>(rng: &mut R, universe: usize, p: f64) -> AbstractSet {
    AbstractSet::from_indices(universe, (0..universe).filter(|_| rng.random_bool(p)))
}

/// Random system with non-empty `F̄` rows and `F̲ ⊆ F̄`. With `sink`, the last
/// state is absorbing in both relations. With `same`, `F̲ = F̄`.
pub fn random_system<R: Rng>(rng: &mut R, n: usize, m: usize, sink: bool, same: bool) -> TransitionSystem {
    let sink_state = sink.then(|| n - 1);
    let density = rng.random_range(0.15..0.6);
    TransitionSystem::from_fn(n, m, sink_state, |s, _| {
        if Some(s) == sink_state {
            return (vec![s], vec![s]);
        }
        let mut over: Vec<usize> = (0..n).filter(|_| rng.random_bool(density)).collect();
        if over.is_empty() {
            over.push(rng.random_range(0..n));
        }
        let under = if same {
            over.clone()
        } else {
            let keep = rng.random_range(0.0..1.0);
            over.iter().copied().filter(|_| rng.random_bool(keep)).collect()
        };
        (over, under)
    })
    .unwrap()
}

/// Every subset of `0..n`.
pub fn all_subsets(n: usize) -> Vec<AbstractSet> {
    (0..1usize << n)
        .map(|bits| AbstractSet::from_indices(n, (0..n).filter(|i| bits >> i & 1 == 1)))
        .collect()
}

fn succ(ts: &TransitionSystem, rel: Relation, x: usize, u: usize) -> Vec<usize> {
    ts.successors(rel, x, u)
}

fn collect<F: Fn(usize) -> bool>(n: usize, f: F) -> AbstractSet {
    AbstractSet::from_indices(n, (0..n).filter(|&x| f(x)))
}

pub fn naive_cpre(ts: &TransitionSystem, rel: Relation, t: &AbstractSet) -> AbstractSet {
    collect(ts.n_states(), |x| {
        (0..ts.n_inputs()).any(|u| succ(ts, rel, x, u).iter().all(|&s| t.contains(s)))
    })
}

pub fn naive_pre(ts: &TransitionSystem, rel: Relation, t: &AbstractSet) -> AbstractSet {
    collect(ts.n_states(), |x| {
        (0..ts.n_inputs()).any(|u| succ(ts, rel, x, u).iter().any(|&s| t.contains(s)))
    })
}

pub fn naive_apre(ts: &TransitionSystem, y: &AbstractSet, z: &AbstractSet) -> AbstractSet {
    collect(ts.n_states(), |x| {
        (0..ts.n_inputs()).any(|u| {
            succ(ts, Relation::Over, x, u).iter().all(|&s| y.contains(s))
                && succ(ts, Relation::Under, x, u).iter().any(|&s| z.contains(s))
        })
    })
}

pub fn naive_upre(ts: &TransitionSystem, y: &AbstractSet, z: &AbstractSet) -> AbstractSet {
    collect(ts.n_states(), |x| {
        (0..ts.n_inputs()).any(|u| {
            succ(ts, Relation::Under, x, u).iter().all(|&s| y.contains(s))
                && succ(ts, Relation::Over, x, u).iter().any(|&s| z.contains(s))
        })
    })
}

/// `νY.μZ.body(Y, Z)` by plain Kleene iteration.
pub fn nu_mu<F>(n: usize, body: F) -> AbstractSet
where
    F: Fn(&AbstractSet, &AbstractSet) -> AbstractSet,
{
    let mut y = AbstractSet::full(n);
    loop {
        let mut z = AbstractSet::empty(n);
        loop {
            let next = body(&y, &z);
            if next == z {
                break;
            }
            z = next;
        }
        if z == y {
            return y;
        }
        y = z;
    }
}

pub fn naive_buchi_under(ts: &TransitionSystem, b: &AbstractSet) -> AbstractSet {
    let bc = b.complement();
    nu_mu(ts.n_states(), |y, z| {
        let mut step = naive_apre(ts, y, z).union(&naive_cpre(ts, Relation::Over, z));
        step.intersect_with(&bc);
        step.union(&b.intersection(&naive_cpre(ts, Relation::Over, y)))
    })
}

pub fn naive_buchi_over(ts: &TransitionSystem, b: &AbstractSet) -> AbstractSet {
    let bc = b.complement();
    nu_mu(ts.n_states(), |y, z| {
        let step = naive_upre(ts, y, z).intersection(&bc);
        let keep = naive_cpre(ts, Relation::Under, y).union(&naive_pre(ts, Relation::Difference, y));
        step.union(&b.intersection(&keep))
    })
}

pub fn naive_as_reach(ts: &TransitionSystem, b: &AbstractSet) -> AbstractSet {
    let bc = b.complement();
    nu_mu(ts.n_states(), |y, z| {
        let step = naive_apre(ts, y, z).union(&naive_cpre(ts, Relation::Over, z));
        step.intersection(&bc).union(b)
    })
}

pub fn naive_worst_case(ts: &TransitionSystem, b: &AbstractSet) -> AbstractSet {
    let bc = b.complement();
    nu_mu(ts.n_states(), |y, z| {
        let step = naive_cpre(ts, Relation::Over, z).intersection(&bc);
        step.union(&b.intersection(&naive_cpre(ts, Relation::Over, y)))
    })
}

pub fn naive_losing(ts: &TransitionSystem, w: &AbstractSet) -> AbstractSet {
    let mut x = w.clone();
    loop {
        let next = naive_pre(ts, Relation::Under, &x).union(w);
        if next == x {
            return x.complement();
        }
        x = next;
    }
}
