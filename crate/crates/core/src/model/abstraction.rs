//! Grid abstraction of a system with additive bounded noise.
//!
//! For a cell `x̂` and input `u`, with `Φ` the nominal reach box of the closed
//! cell, `S₁ = D̄ ⊕ Φ` contains every possible successor and
//! `S₂ = [D̲.lo + Φ.hi, D̲.hi + Φ.lo]` contains only points that every state of
//! the cell reaches with positive density. `F̄` collects the cells touching
//! `S₁`; `F̲` the cells overlapping `S₂` with positive volume. Leaving the
//! working region or entering an obstacle cell is mapped to the sink.

use rayon::prelude::*;
use thiserror::Error;

use super::SystemModel;
use crate::game::{GameError, TransitionSystem};
use crate::geometry::{minkowski_diff_negated, minkowski_sum, reach_box, GeometryError};
use crate::grid::{product_indices, Grid, HyperRect, ALIGN_TOL};

#[derive(Debug, Error, PartialEq)]
pub enum AbstractionError {
    #[error("model has dimension {model}, grid has dimension {grid}")]
    DimensionMismatch { model: usize, grid: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("chain abstraction: {0}")]
    ChainGrid(String),
}

/// Cells of one dimension met by `[a, b]`, and whether `[a, b]` leaves the region.
fn closed_range(g: &Grid, d: usize, a: f64, b: f64) -> (Vec<usize>, bool) {
    let lo = g.region().lo()[d];
    let hi = g.region().hi()[d];
    let w = g.widths()[d];
    let n = g.cells_per_dim()[d] as i64;
    let first = ((a - lo) / w - 1.0 - ALIGN_TOL).ceil() as i64;
    let last = ((b - lo) / w + ALIGN_TOL).floor() as i64;
    if g.periodic()[d] {
        if last - first + 1 >= n {
            return ((0..n as usize).collect(), false);
        }
        return ((first..=last).map(|i| i.rem_euclid(n) as usize).collect(), false);
    }
    let tol = ALIGN_TOL * w;
    let leaves = a < lo + tol || b > hi - tol;
    let first = first.max(0);
    let last = last.min(n - 1);
    ((first..=last).map(|i| i as usize).collect(), leaves)
}

/// Cells of one dimension overlapping `[a, b]` with positive length, and
/// whether a positive length of `[a, b]` lies outside the region.
fn open_range(g: &Grid, d: usize, a: f64, b: f64) -> (Vec<usize>, bool) {
    let lo = g.region().lo()[d];
    let hi = g.region().hi()[d];
    let w = g.widths()[d];
    let n = g.cells_per_dim()[d] as i64;
    let first = ((a - lo) / w + ALIGN_TOL).floor() as i64;
    let last = ((b - lo) / w - ALIGN_TOL).ceil() as i64 - 1;
    if first > last {
        return (Vec::new(), false);
    }
    if g.periodic()[d] {
        if last - first + 1 >= n {
            return ((0..n as usize).collect(), false);
        }
        return ((first..=last).map(|i| i.rem_euclid(n) as usize).collect(), false);
    }
    let tol = ALIGN_TOL * w;
    let leaves = a < lo - tol || b > hi + tol;
    let first = first.max(0);
    let last = last.min(n - 1);
    ((first..=last).map(|i| i as usize).collect(), leaves)
}

fn collect(g: &Grid, ranges: &[Vec<usize>], leaves: bool) -> Vec<u32> {
    let sink = g.sink_index() as u32;
    let mut out: Vec<u32> = Vec::new();
    let mut hits_sink = leaves;
    if ranges.iter().all(|r| !r.is_empty()) {
        for c in product_indices(ranges, g.strides()) {
            if g.is_blocked(c) {
                hits_sink = true;
            } else {
                out.push(c as u32);
            }
        }
    }
    if hits_sink {
        out.push(sink);
    }
    out
}

/// `(F̄, F̲)` of a free cell under one input.
fn successors(m: &SystemModel, g: &Grid, cell: usize, u: usize) -> Result<(Vec<u32>, Vec<u32>), AbstractionError> {
    let cell_box = g.cell_box_unchecked(cell);
    let phi = reach_box(m.box_map(), &cell_box, u)?;
    let s1 = minkowski_sum(&phi, m.d_over())?;
    let s2 = minkowski_diff_negated(m.d_under(), &phi)?;

    let mut leaves = false;
    let mut ranges = Vec::with_capacity(g.dim());
    for d in 0..g.dim() {
        let (r, out) = closed_range(g, d, s1.lo()[d], s1.hi()[d]);
        leaves |= out;
        ranges.push(r);
    }
    let over = collect(g, &ranges, leaves);

    let under = if positive_volume(&s2) {
        let mut leaves = false;
        let mut ranges = Vec::with_capacity(g.dim());
        for d in 0..g.dim() {
            let (r, out) = open_range(g, d, s2.lo()[d], s2.hi()[d]);
            leaves |= out;
            ranges.push(r);
        }
        collect(g, &ranges, leaves)
    } else {
        Vec::new()
    };
    Ok((over, under))
}

fn positive_volume(b: &HyperRect) -> bool {
    !b.is_empty() && (0..b.dim()).all(|d| b.width(d) > 0.0)
}

/// Builds the two-relation abstraction of `m` on `g`. Pairs are processed in
/// parallel; the result does not depend on scheduling.
pub fn build_abstraction(m: &SystemModel, g: &Grid) -> Result<TransitionSystem, AbstractionError> {
    if m.dim() != g.dim() {
        return Err(AbstractionError::DimensionMismatch {
            model: m.dim(),
            grid: g.dim(),
        });
    }
    let n_inputs = m.n_inputs();
    let sink = g.sink_index() as u32;
    let mut pairs: Vec<(Vec<u32>, Vec<u32>)> = (0..g.cell_count() * n_inputs)
        .into_par_iter()
        .map(|p| {
            let (cell, u) = (p / n_inputs, p % n_inputs);
            if g.is_blocked(cell) {
                Ok((vec![sink], vec![sink]))
            } else {
                successors(m, g, cell, u)
            }
        })
        .collect::<Result<_, AbstractionError>>()?;
    pairs.extend((0..n_inputs).map(|_| (vec![sink], vec![sink])));
    Ok(TransitionSystem::from_pairs(
        g.state_count(),
        n_inputs,
        Some(g.sink_index()),
        pairs,
    )?)
}
