//! The one-dimensional chains on `[0, 2]` used to show why the
//! under-approximating relation needs a uniform lower bound.
//!
//! From `s ∈ [1, 2]` the next state is uniform on `[1, 2]`. From `s = 0` it
//! stays at 0 with probability 0.5 and is otherwise uniform on `[1, 2]`. From
//! `s ∈ (0, 1)` it is uniform on `[1, 2]` with probability `a(s)` and equal to
//! `b(s) = s / (1 + s)` otherwise.

use rand::Rng;

use super::abstraction::AbstractionError;
use crate::game::TransitionSystem;
use crate::grid::{CellId, Grid, HyperRect, ALIGN_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainKind {
    /// `a(s) = s²`: escape becomes arbitrarily unlikely near 0.
    Quadratic,
    /// `a(s) = 0.5`.
    Constant,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteCMP {
    kind: ChainKind,
}

impl FiniteCMP {
    pub fn new(kind: ChainKind) -> Self {
        Self { kind }
    }

    pub fn kind(&self) -> ChainKind {
        self.kind
    }

    pub fn region() -> HyperRect {
        HyperRect::new(vec![0.0], vec![2.0]).expect("valid box")
    }

    /// Probability of jumping to `[1, 2]` from `s ∈ (0, 1)`.
    pub fn a(&self, s: f64) -> f64 {
        match self.kind {
            ChainKind::Quadratic => s * s,
            ChainKind::Constant => 0.5,
        }
    }

    pub fn b(s: f64) -> f64 {
        s / (1.0 + s)
    }

    pub fn step<R: Rng + ?Sized>(&self, s: f64, rng: &mut R) -> f64 {
        let escape = if s >= 1.0 {
            1.0
        } else if s == 0.0 {
            0.5
        } else {
            self.a(s)
        };
        if rng.random::<f64>() < escape {
            rng.random_range(1.0..=2.0)
        } else {
            Self::b(s)
        }
    }

    /// Exact one-step probability of landing in `target` from `s`.
    pub fn mass(&self, g: &Grid, s: f64, target: CellId) -> f64 {
        let CellId::Cell(j) = target else {
            return 0.0;
        };
        let cell = g.cell_box_unchecked(j);
        let upper = cell.lo()[0] >= 1.0 - ALIGN_TOL;
        let w = cell.width(0);
        if s >= 1.0 {
            return if upper { w } else { 0.0 };
        }
        let a = if s == 0.0 { 0.5 } else { self.a(s) };
        let mut m = if upper { a * w } else { 0.0 };
        if g.quantize(&[Self::b(s)]) == target {
            m += 1.0 - a;
        }
        m
    }

    /// Abstraction from the kernel formulas. The grid must cover `[0, 2]`
    /// with 1 on a cell boundary.
    pub fn abstraction(&self, g: &Grid) -> Result<TransitionSystem, AbstractionError> {
        let region = Self::region();
        if g.dim() != 1 || g.region() != &region || g.periodic()[0] || !g.obstacles().is_empty() {
            return Err(AbstractionError::ChainGrid("expected a plain grid over [0,2]".into()));
        }
        let w = g.widths()[0];
        let k1 = (1.0 / w).round() as usize;
        if ((k1 as f64) * w - 1.0).abs() > ALIGN_TOL * w {
            return Err(AbstractionError::ChainGrid(format!(
                "1 is not a cell boundary for width {w}"
            )));
        }
        let n = g.cell_count();
        let sink = g.sink_index();
        let upper: Vec<usize> = (k1..n).collect();
        let index = |x: f64| ((x / w + ALIGN_TOL).floor() as usize).min(k1 - 1);
        TransitionSystem::from_fn(g.state_count(), 1, Some(sink), |i, _| {
            if i == sink {
                return (vec![sink], vec![sink]);
            }
            if i >= k1 {
                return (upper.clone(), upper.clone());
            }
            let (c, d) = (i as f64 * w, (i + 1) as f64 * w);
            let (lo, hi) = (index(Self::b(c)), index(Self::b(d)));
            let mut over: Vec<usize> = (lo..=hi).collect();
            over.extend(&upper);
            let mut under = Vec::new();
            // b maps [c, d) into [b(c), b(d)); it stays in one cell when b(d)
            // does not pass the next boundary.
            let single = Self::b(d) <= (lo + 1) as f64 * w + ALIGN_TOL * w;
            let stay_bounded = match self.kind {
                ChainKind::Constant => true,
                ChainKind::Quadratic => d < 1.0 - ALIGN_TOL,
            };
            if single && stay_bounded {
                under.push(lo);
            }
            let escape_bounded = match self.kind {
                ChainKind::Constant => true,
                ChainKind::Quadratic => c > 0.0,
            };
            if escape_bounded {
                under.extend(&upper);
            }
            (over, under)
        })
        .map_err(AbstractionError::from)
    }
}
