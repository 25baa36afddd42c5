//! Controller refinement and closed-loop Monte-Carlo simulation.
//!
//! Visiting the target a number of times within a long horizon is used as a
//! finite-trace proxy for visiting it infinitely often.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::game::TransitionSystem;
use crate::grid::{CellId, Grid, HyperRect};
use crate::model::{FiniteCMP, SystemModel};
use crate::set::AbstractSet;
use crate::solver::Controller;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("cell {cell} under input {input} has no under-successor other than itself")]
    NoExit { cell: usize, input: usize },
    #[error("the sink has no states to start from")]
    SinkStart,
    #[error("initial state {0:?} lies outside [0, 2]")]
    OutsideChain(f64),
    #[error("no winning cells to sample initial states from")]
    EmptyRegion,
}

/// Concrete systems that can be stepped with sampled noise.
pub trait Stochastic: Sync {
    fn sample_step(&self, s: &[f64], u: usize, rng: &mut ChaCha8Rng) -> Vec<f64>;
}

impl Stochastic for SystemModel {
    fn sample_step(&self, s: &[f64], u: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.step(s, u, rng)
    }
}

impl Stochastic for FiniteCMP {
    fn sample_step(&self, s: &[f64], _u: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![self.step(s[0], rng)]
    }
}

/// Outcome of evaluating the refined controller at a concrete state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Input(usize),
    /// The state is outside the controller's domain (or in the sink).
    NoGuarantee,
}

/// The abstract controller composed with the quantizer.
#[derive(Clone, Copy, Debug)]
pub struct RefinedController<'a> {
    grid: &'a Grid,
    controller: &'a Controller,
}

pub fn refine<'a>(controller: &'a Controller, grid: &'a Grid) -> RefinedController<'a> {
    RefinedController { grid, controller }
}

impl RefinedController<'_> {
    pub fn decide(&self, s: &[f64]) -> Decision {
        match self.grid.quantize(s) {
            CellId::Cell(c) => self.controller.get(c).map_or(Decision::NoGuarantee, Decision::Input),
            CellId::Sink => Decision::NoGuarantee,
        }
    }
}

/// Input used where the controller gives no guarantee.
pub const FALLBACK_INPUT: usize = 0;

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub state: Vec<f64>,
    /// Input applied from this state; `None` for the last state.
    pub input: Option<usize>,
    pub in_target: bool,
    pub in_winning: bool,
    pub sink: bool,
    /// The input came from the fallback rather than the controller.
    pub unguaranteed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn target_visits(&self) -> usize {
        self.steps.iter().filter(|s| s.in_target).count()
    }

    pub fn hit_sink(&self) -> bool {
        self.steps.iter().any(|s| s.sink)
    }

    pub fn stayed_in(&self) -> bool {
        self.steps.iter().all(|s| s.in_winning)
    }

    /// One line per step: `k s[0] … s[n-1] u flags`. Coordinates carry 17
    /// significant digits; `u` is `-` where no input was applied; flags are
    /// `B` (target), `W` (winning cell), `P` (sink), `N` (fallback input),
    /// or `-` when none apply.
    pub fn write_to<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for (k, step) in self.steps.iter().enumerate() {
            write!(out, "{k}")?;
            for x in &step.state {
                write!(out, " {x:.16e}")?;
            }
            match step.input {
                Some(u) => write!(out, " {u}")?,
                None => write!(out, " -")?,
            }
            let mut flags = String::new();
            for (on, c) in [
                (step.in_target, 'B'),
                (step.in_winning, 'W'),
                (step.sink, 'P'),
                (step.unguaranteed, 'N'),
            ] {
                if on {
                    flags.push(c);
                }
            }
            if flags.is_empty() {
                flags.push('-');
            }
            writeln!(out, " {flags}")?;
        }
        Ok(())
    }
}

/// What a closed-loop run is judged against.
#[derive(Clone, Copy, Debug)]
pub struct Observer<'a> {
    pub grid: &'a Grid,
    pub target: &'a HyperRect,
    pub winning: &'a AbstractSet,
}

impl Observer<'_> {
    fn step(&self, state: Vec<f64>, input: Option<usize>, unguaranteed: bool) -> Step {
        let cell = self.grid.quantize(&state);
        let (in_winning, sink) = match cell {
            CellId::Cell(c) => (self.winning.contains(c), false),
            CellId::Sink => (false, true),
        };
        Step {
            in_target: !sink && self.target.contains_point(&state),
            in_winning,
            sink,
            input,
            unguaranteed,
            state,
        }
    }
}

/// Runs the closed loop `s(k+1) = f(s(k), C(s(k))) + w(k)` for `horizon`
/// steps, stopping early when the sink is reached.
pub fn simulate<S: Stochastic + ?Sized>(
    system: &S,
    policy: &RefinedController<'_>,
    observer: &Observer<'_>,
    s0: &[f64],
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory, SimError> {
    if horizon == 0 {
        return Err(SimError::ZeroHorizon);
    }
    let mut steps = Vec::with_capacity(horizon + 1);
    let mut state = s0.to_vec();
    observer.grid.wrap_state(&mut state);
    for _ in 0..horizon {
        let (u, fallback) = match policy.decide(&state) {
            Decision::Input(u) => (u, false),
            Decision::NoGuarantee => (FALLBACK_INPUT, true),
        };
        let step = observer.step(state.clone(), Some(u), fallback);
        let stop = step.sink;
        steps.push(step);
        if stop {
            steps.last_mut().expect("just pushed").input = None;
            return Ok(Trajectory { steps });
        }
        state = system.sample_step(&state, u, rng);
        observer.grid.wrap_state(&mut state);
    }
    steps.push(observer.step(state, None, false));
    Ok(Trajectory { steps })
}

/// Aggregate statistics of a batch of runs.
#[derive(Clone, Debug, PartialEq)]
pub struct SimStats {
    pub trials: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Target visits per trial (empty for runs that do not track a target).
    pub target_visits: Vec<usize>,
    /// Fraction of trials whose every state stayed in a winning cell.
    pub stayed_fraction: f64,
    /// Fraction of trials that stayed in the designated cell or interval
    /// for the whole horizon.
    pub trapped_fraction: f64,
    pub sink_hits: usize,
    /// Steps, over all trials, at which the fallback input was used.
    pub fallback_steps: usize,
}

impl SimStats {
    fn empty(horizon: usize, seed: u64) -> Self {
        Self {
            trials: 0,
            horizon,
            seed,
            target_visits: Vec::new(),
            stayed_fraction: 0.0,
            trapped_fraction: 0.0,
            sink_hits: 0,
            fallback_steps: 0,
        }
    }

    pub fn min_visits(&self) -> Option<usize> {
        self.target_visits.iter().copied().min()
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64))
}

fn fraction(count: usize, trials: usize) -> f64 {
    if trials == 0 {
        0.0
    } else {
        count as f64 / trials as f64
    }
}

/// Uniform sample from the half-open cell `c`.
fn sample_in_cell(g: &Grid, c: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let b = g.cell_box_unchecked(c);
    (0..b.dim()).map(|i| rng.random_range(b.lo()[i]..b.hi()[i])).collect()
}

/// Runs `trials` closed-loop simulations from states drawn uniformly from
/// the winning cells. Trial `i` uses seed `seed + i`.
pub fn simulate_batch<S: Stochastic + ?Sized>(
    system: &S,
    controller: &Controller,
    observer: &Observer<'_>,
    trials: usize,
    horizon: usize,
    seed: u64,
) -> Result<(SimStats, Vec<Trajectory>), SimError> {
    if horizon == 0 {
        return Err(SimError::ZeroHorizon);
    }
    if trials == 0 {
        return Ok((SimStats::empty(horizon, seed), Vec::new()));
    }
    let cells: Vec<usize> = observer
        .winning
        .iter()
        .filter(|&c| c < observer.grid.cell_count())
        .collect();
    if cells.is_empty() {
        return Err(SimError::EmptyRegion);
    }
    let policy = refine(controller, observer.grid);
    let runs: Vec<Trajectory> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let c = cells[rng.random_range(0..cells.len())];
            let s0 = sample_in_cell(observer.grid, c, &mut rng);
            simulate(system, &policy, observer, &s0, horizon, &mut rng)
        })
        .collect::<Result<_, _>>()?;
    let stats = SimStats {
        trials,
        horizon,
        seed,
        target_visits: runs.iter().map(Trajectory::target_visits).collect(),
        stayed_fraction: fraction(runs.iter().filter(|r| r.stayed_in()).count(), trials),
        trapped_fraction: 0.0,
        sink_hits: runs.iter().filter(|r| r.hit_sink()).count(),
        fallback_steps: runs
            .iter()
            .map(|r| r.steps.iter().filter(|s| s.unguaranteed).count())
            .sum(),
    };
    Ok((stats, runs))
}

/// Samples the chain exactly and reports the fraction of trials that stay
/// in `[0, 1)` for `horizon` steps.
pub fn simulate_chain(
    chain: &FiniteCMP,
    s0: f64,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<SimStats, SimError> {
    if !(0.0..=2.0).contains(&s0) {
        return Err(SimError::OutsideChain(s0));
    }
    if horizon == 0 {
        return Err(SimError::ZeroHorizon);
    }
    let trapped = (0..trials)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = trial_rng(seed, t);
            let mut s = s0;
            if s >= 1.0 {
                return false;
            }
            for _ in 0..horizon {
                s = chain.step(s, &mut rng);
                if s >= 1.0 {
                    return false;
                }
            }
            true
        })
        .count();
    Ok(SimStats {
        trapped_fraction: fraction(trapped, trials),
        trials,
        ..SimStats::empty(horizon, seed)
    })
}

/// Repeats input `u` from uniform starts in `cell` and reports the fraction
/// of trials still inside the cell after `horizon` steps. Only meaningful
/// when `F̲(cell, u)` has a successor other than the cell itself.
#[allow(clippy::too_many_arguments)]
pub fn escape_test<S: Stochastic + ?Sized>(
    system: &S,
    g: &Grid,
    ts: &TransitionSystem,
    cell: CellId,
    u: usize,
    trials: usize,
    horizon: usize,
    seed: u64,
) -> Result<SimStats, SimError> {
    let CellId::Cell(c) = cell else {
        return Err(SimError::SinkStart);
    };
    if !ts.under(c, u).iter().any(|&t| t as usize != c) {
        return Err(SimError::NoExit { cell: c, input: u });
    }
    if horizon == 0 {
        return Err(SimError::ZeroHorizon);
    }
    let trapped = (0..trials)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = trial_rng(seed, t);
            let mut s = sample_in_cell(g, c, &mut rng);
            for _ in 0..horizon {
                s = system.sample_step(&s, u, &mut rng);
                g.wrap_state(&mut s);
                if g.quantize(&s) != cell {
                    return false;
                }
            }
            true
        })
        .count();
    Ok(SimStats {
        trapped_fraction: fraction(trapped, trials),
        trials,
        ..SimStats::empty(horizon, seed)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ChainKind;

    #[test]
    fn export_format() {
        let t = Trajectory {
            steps: vec![
                Step {
                    state: vec![0.5, -1.0],
                    input: Some(2),
                    in_target: true,
                    in_winning: true,
                    sink: false,
                    unguaranteed: false,
                },
                Step {
                    state: vec![3.0, 0.1],
                    input: None,
                    in_target: false,
                    in_winning: false,
                    sink: true,
                    unguaranteed: false,
                },
            ],
        };
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "0 5.0000000000000000e-1 -1.0000000000000000e0 2 BW");
        assert_eq!(lines[1], "1 3.0000000000000000e0 1.0000000000000001e-1 - P");
        let back: f64 = lines[1].split(' ').nth(2).unwrap().parse().unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn chain_simulation_is_seeded() {
        let chain = FiniteCMP::new(ChainKind::Quadratic);
        let a = simulate_chain(&chain, 0.5, 100, 500, 11).unwrap();
        let b = simulate_chain(&chain, 0.5, 100, 500, 11).unwrap();
        assert_eq!(a, b);
        assert!(simulate_chain(&chain, 2.5, 10, 10, 0).is_err());
        let top = simulate_chain(&chain, 1.5, 10, 10, 0).unwrap();
        assert_eq!(top.trapped_fraction, 0.0);
    }
}
