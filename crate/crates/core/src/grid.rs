//! Working region, uniform partition and the quantizer.
//!
//! Cells are half-open `[a, a + w)` in every dimension except the topmost
//! cell of a non-periodic dimension, which is closed so that the whole
//! closed working region is covered. Everything outside the region (and
//! everything inside an obstacle) maps to the sink state.

use std::f64::consts::PI;
use std::fmt;

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::set::AbstractSet;

/// Relative tolerance used for grid alignment checks, in units of a cell width.
pub const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("working region is empty")]
    EmptyRegion,
    #[error("cell width in dimension {dim} must be positive, got {width}")]
    NonPositiveWidth { dim: usize, width: f64 },
    #[error("width {width} does not divide the span {span} of dimension {dim}")]
    NotDivisible { dim: usize, span: f64, width: f64 },
    #[error("obstacle {index} is not contained in the working region")]
    ObstacleOutside { index: usize },
    #[error("box {0} is not contained in the working region")]
    OutsideRegion(HyperRect),
    #[error("the sink state has no geometry")]
    SinkHasNoBox,
    #[error("cell index {0} out of range")]
    CellOutOfRange(usize),
    #[error("set contains the sink state")]
    SinkInSet,
}

/// Axis-aligned hyper-rectangle `[lo, hi]`.
///
/// A box with `lo[i] > hi[i]` in any dimension is empty; all empty boxes
/// compare equal.
#[derive(Clone, Debug)]
pub struct HyperRect {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl HyperRect {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GridError> {
        if lo.len() != hi.len() {
            return Err(GridError::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        Ok(Self { lo, hi })
    }

    /// Canonical empty box of the given dimension.
    pub fn empty(dim: usize) -> Self {
        Self {
            lo: vec![1.0; dim],
            hi: vec![-1.0; dim],
        }
    }

    pub fn point(p: &[f64]) -> Self {
        Self {
            lo: p.to_vec(),
            hi: p.to_vec(),
        }
    }

    /// `[-r, r]^n` for a per-dimension radius.
    pub fn symmetric(radius: &[f64]) -> Self {
        Self {
            lo: radius.iter().map(|r| -r).collect(),
            hi: radius.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.lo
            .iter()
            .zip(&self.hi)
            .any(|(l, h)| l > h || l.is_nan() || h.is_nan())
    }

    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn volume(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        (0..self.dim()).map(|i| self.width(i)).product()
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        !self.is_empty() && p.iter().enumerate().all(|(i, x)| self.lo[i] <= *x && *x <= self.hi[i])
    }

    /// `other ⊆ self`. The empty box is contained in everything.
    pub fn contains(&self, other: &HyperRect) -> bool {
        if other.is_empty() {
            return true;
        }
        !self.is_empty() && (0..self.dim()).all(|i| self.lo[i] <= other.lo[i] && other.hi[i] <= self.hi[i])
    }

    /// Closed intersection test: touching faces count.
    pub fn intersects(&self, other: &HyperRect) -> bool {
        !self.is_empty()
            && !other.is_empty()
            && (0..self.dim()).all(|i| self.lo[i] <= other.hi[i] && other.lo[i] <= self.hi[i])
    }

    pub fn intersection(&self, other: &HyperRect) -> HyperRect {
        let lo = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        let r = HyperRect { lo, hi };
        if r.is_empty() {
            HyperRect::empty(self.dim())
        } else {
            r
        }
    }
}

impl PartialEq for HyperRect {
    fn eq(&self, other: &Self) -> bool {
        match (self.is_empty(), other.is_empty()) {
            (true, true) => true,
            (false, false) => self.lo == other.lo && self.hi == other.hi,
            _ => false,
        }
    }
}

impl fmt::Display for HyperRect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "(empty)");
        }
        for i in 0..self.dim() {
            if i > 0 {
                write!(f, "x")?;
            }
            write!(f, "[{},{}]", self.lo[i], self.hi[i])?;
        }
        Ok(())
    }
}

/// An abstract state: a grid cell or the sink.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellId {
    Cell(usize),
    Sink,
}

/// Uniform partition of a box-shaped working region.
#[derive(Clone, Debug)]
pub struct Grid {
    region: HyperRect,
    widths: Vec<f64>,
    periodic: Vec<bool>,
    cells_per_dim: Vec<usize>,
    strides: Vec<usize>,
    obstacles: Vec<HyperRect>,
    blocked: FixedBitSet,
}

impl Grid {
    pub fn new(
        region: HyperRect,
        widths: Vec<f64>,
        periodic: Vec<bool>,
        obstacles: Vec<HyperRect>,
    ) -> Result<Self, GridError> {
        let n = region.dim();
        for len in [widths.len(), periodic.len()] {
            if len != n {
                return Err(GridError::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        if region.is_empty() {
            return Err(GridError::EmptyRegion);
        }
        let mut cells_per_dim = Vec::with_capacity(n);
        for (dim, &width) in widths.iter().enumerate() {
            if width <= 0.0 || !width.is_finite() {
                return Err(GridError::NonPositiveWidth { dim, width });
            }
            let span = region.width(dim);
            let count = (span / width).round();
            if count < 1.0 || (count * width - span).abs() > ALIGN_TOL * width {
                return Err(GridError::NotDivisible { dim, span, width });
            }
            cells_per_dim.push(count as usize);
        }
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * cells_per_dim[i + 1];
        }
        let total: usize = cells_per_dim.iter().product();

        let mut grid = Grid {
            region,
            widths,
            periodic,
            cells_per_dim,
            strides,
            obstacles: Vec::new(),
            blocked: FixedBitSet::with_capacity(total),
        };
        for (index, ob) in obstacles.iter().enumerate() {
            if ob.dim() != n {
                return Err(GridError::DimensionMismatch {
                    expected: n,
                    found: ob.dim(),
                });
            }
            if ob.is_empty() || !grid.region_contains_box(ob) {
                return Err(GridError::ObstacleOutside { index });
            }
            // Snap outward: every cell overlapping the obstacle with positive
            // volume is removed from the working region.
            let ranges: Vec<Vec<usize>> = (0..n).map(|d| grid.overlap_range(d, ob.lo[d], ob.hi[d])).collect();
            for c in product_indices(&ranges, &grid.strides) {
                grid.blocked.insert(c);
            }
        }
        grid.obstacles = obstacles;
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    pub fn region(&self) -> &HyperRect {
        &self.region
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn cells_per_dim(&self) -> &[usize] {
        &self.cells_per_dim
    }

    pub fn obstacles(&self) -> &[HyperRect] {
        &self.obstacles
    }

    /// Number of grid cells, excluding the sink.
    pub fn cell_count(&self) -> usize {
        self.cells_per_dim.iter().product()
    }

    /// Index of the sink in abstract-state numbering (one past the last cell).
    pub fn sink_index(&self) -> usize {
        self.cell_count()
    }

    /// Size of the abstract state space, sink included.
    pub fn state_count(&self) -> usize {
        self.cell_count() + 1
    }

    pub fn index_of(&self, c: CellId) -> usize {
        match c {
            CellId::Cell(i) => i,
            CellId::Sink => self.sink_index(),
        }
    }

    pub fn id_of(&self, index: usize) -> CellId {
        if index == self.sink_index() {
            CellId::Sink
        } else {
            CellId::Cell(index)
        }
    }

    pub fn is_blocked(&self, cell: usize) -> bool {
        self.blocked.contains(cell)
    }

    pub(crate) fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn cell_volume(&self) -> f64 {
        self.widths.iter().product()
    }

    /// All cells of the working region that are not covered by an obstacle.
    pub fn free_cells(&self) -> AbstractSet {
        let mut set = AbstractSet::empty(self.state_count());
        for c in 0..self.cell_count() {
            if !self.blocked.contains(c) {
                set.insert(c);
            }
        }
        set
    }

    pub fn coords(&self, cell: usize) -> Vec<usize> {
        let mut rest = cell;
        self.strides
            .iter()
            .map(|s| {
                let c = rest / s;
                rest %= s;
                c
            })
            .collect()
    }

    pub fn cell_of_coords(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    /// Maps a concrete state to the cell containing it.
    pub fn quantize(&self, s: &[f64]) -> CellId {
        debug_assert_eq!(s.len(), self.dim());
        let mut index = 0;
        for (d, &x) in s.iter().enumerate() {
            let lo = self.region.lo[d];
            let hi = self.region.hi[d];
            let mut x = x;
            if !x.is_finite() {
                return CellId::Sink;
            }
            if self.periodic[d] {
                x = self.wrap(d, x);
            } else if x < lo || x > hi {
                return CellId::Sink;
            }
            let n = self.cells_per_dim[d];
            let k = ((x - lo) / self.widths[d]).floor();
            let k = if k < 0.0 { 0 } else { (k as usize).min(n - 1) };
            index += k * self.strides[d];
        }
        if self.blocked.contains(index) || self.in_obstacle(s) {
            return CellId::Sink;
        }
        CellId::Cell(index)
    }

    fn in_obstacle(&self, s: &[f64]) -> bool {
        if self.obstacles.is_empty() {
            return false;
        }
        let wrapped: Vec<f64> = (0..self.dim())
            .map(|d| if self.periodic[d] { self.wrap(d, s[d]) } else { s[d] })
            .collect();
        self.obstacles.iter().any(|ob| ob.contains_point(&wrapped))
    }

    /// Wraps a coordinate of a periodic dimension into `[lo, hi)`.
    pub fn wrap(&self, d: usize, x: f64) -> f64 {
        let lo = self.region.lo[d];
        let span = self.region.width(d);
        let w = lo + (x - lo).rem_euclid(span);
        if w >= self.region.hi[d] {
            lo
        } else {
            w
        }
    }

    /// Wraps all periodic coordinates of a state in place.
    pub fn wrap_state(&self, s: &mut [f64]) {
        for (d, x) in s.iter_mut().enumerate() {
            if self.periodic[d] {
                *x = self.wrap(d, *x);
            }
        }
    }

    /// Closed hull of a cell.
    pub fn cell_box(&self, c: CellId) -> Result<HyperRect, GridError> {
        let CellId::Cell(i) = c else {
            return Err(GridError::SinkHasNoBox);
        };
        if i >= self.cell_count() {
            return Err(GridError::CellOutOfRange(i));
        }
        Ok(self.cell_box_unchecked(i))
    }

    pub(crate) fn cell_box_unchecked(&self, cell: usize) -> HyperRect {
        let coords = self.coords(cell);
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for (d, &k) in coords.iter().enumerate() {
            let a = self.region.lo[d] + k as f64 * self.widths[d];
            let b = if k + 1 == self.cells_per_dim[d] {
                self.region.hi[d]
            } else {
                self.region.lo[d] + (k + 1) as f64 * self.widths[d]
            };
            lo.push(a);
            hi.push(b);
        }
        HyperRect { lo, hi }
    }

    /// Lebesgue volume of a set of cells.
    pub fn volume(&self, cells: &AbstractSet) -> Result<f64, GridError> {
        if cells.universe() > self.sink_index() && cells.contains(self.sink_index()) {
            return Err(GridError::SinkInSet);
        }
        Ok(cells.len() as f64 * self.cell_volume())
    }

    pub(crate) fn region_contains_box(&self, b: &HyperRect) -> bool {
        (0..self.dim()).all(|d| {
            let tol = ALIGN_TOL * self.widths[d];
            b.lo[d] >= self.region.lo[d] - tol && b.hi[d] <= self.region.hi[d] + tol
        })
    }

    /// Cell coordinates in dimension `d` whose half-open extent overlaps
    /// `[a, b]` with positive length, clipped to the region (no wrapping).
    pub(crate) fn overlap_range(&self, d: usize, a: f64, b: f64) -> Vec<usize> {
        let lo = self.region.lo[d];
        let w = self.widths[d];
        let n = self.cells_per_dim[d] as i64;
        let first = ((a - lo) / w + ALIGN_TOL).floor() as i64;
        let last = ((b - lo) / w - ALIGN_TOL).ceil() as i64 - 1;
        (first.max(0)..=last.min(n - 1)).map(|k| k as usize).collect()
    }
}

/// Row-major flat indices of the cartesian product of per-dimension coordinates.
pub(crate) fn product_indices(ranges: &[Vec<usize>], strides: &[usize]) -> Vec<usize> {
    if ranges.iter().any(|r| r.is_empty()) {
        return Vec::new();
    }
    let mut out = vec![0usize];
    for (range, stride) in ranges.iter().zip(strides) {
        let mut next = Vec::with_capacity(out.len() * range.len());
        for base in &out {
            for k in range {
                next.push(base + k * stride);
            }
        }
        out = next;
    }
    out
}

/// Convenience constructor matching the usual `build_grid` call shape.
pub fn build_grid(
    region: HyperRect,
    widths: Vec<f64>,
    periodic: Vec<bool>,
    obstacles: Vec<HyperRect>,
) -> Result<Grid, GridError> {
    Grid::new(region, widths, periodic, obstacles)
}

/// Width that splits the span `[-π, π]` into `cells` equal parts.
pub fn angular_width(cells: usize) -> f64 {
    2.0 * PI / cells as f64
}
