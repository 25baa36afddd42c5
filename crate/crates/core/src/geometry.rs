//! Box arithmetic and nominal reach-set over-approximation.
//!
//! Reach sets are boxes. The default evaluator is the natural interval
//! extension of the nominal map: the same generic expression used for point
//! simulation is evaluated over [`Interval`]s. A decomposition function
//! `h(x, y)` can be plugged in instead for mixed-monotone maps, in which case
//! the reach set of `[a, b]` is `[h(a, b), h(b, a)]`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::grid::HyperRect;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("empty box operand")]
    EmptyOperand,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("reach-set evaluation failed on cell {cell} under input {input}: {reason}")]
    EvaluationFailed {
        cell: HyperRect,
        input: usize,
        reason: String,
    },
}

/// Closed interval `[lo, hi]` of reals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn is_valid(&self) -> bool {
        self.lo <= self.hi
    }

    /// Whether `[lo, hi]` contains a point of the form `base + 2πk`.
    fn hits(&self, base: f64) -> bool {
        let k = ((self.lo - base) / (2.0 * PI)).ceil();
        base + 2.0 * PI * k <= self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval::new(self.lo + rhs.lo, self.hi + rhs.hi)
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval::new(self.lo - rhs.hi, self.hi - rhs.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let p = [self.lo * rhs.lo, self.lo * rhs.hi, self.hi * rhs.lo, self.hi * rhs.hi];
        Interval::new(
            p.iter().copied().fold(f64::INFINITY, f64::min),
            p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

impl Add<f64> for Interval {
    type Output = Interval;
    fn add(self, rhs: f64) -> Interval {
        Interval::new(self.lo + rhs, self.hi + rhs)
    }
}

impl Mul<f64> for Interval {
    type Output = Interval;
    fn mul(self, rhs: f64) -> Interval {
        if rhs >= 0.0 {
            Interval::new(self.lo * rhs, self.hi * rhs)
        } else {
            Interval::new(self.hi * rhs, self.lo * rhs)
        }
    }
}

/// Arithmetic shared by concrete states (`f64`) and boxes (`Interval`), so a
/// nominal map written once serves both simulation and reach-set evaluation.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn constant(c: f64) -> Self;
    fn sqr(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn sqr(self) -> Self {
        self * self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
}

impl Scalar for Interval {
    fn constant(c: f64) -> Self {
        Interval::point(c)
    }

    fn sqr(self) -> Self {
        if self.lo >= 0.0 {
            Interval::new(self.lo * self.lo, self.hi * self.hi)
        } else if self.hi <= 0.0 {
            Interval::new(self.hi * self.hi, self.lo * self.lo)
        } else {
            Interval::new(0.0, (self.lo * self.lo).max(self.hi * self.hi))
        }
    }

    /// Monotonicity-aware: extrema are taken at the endpoints unless a
    /// critical point `±π/2 + 2πk` lies inside.
    fn sin(self) -> Self {
        if self.width().is_nan() || self.width() >= 2.0 * PI {
            return Interval::new(-1.0, 1.0);
        }
        let (a, b) = (self.lo.sin(), self.hi.sin());
        let hi = if self.hits(FRAC_PI_2) { 1.0 } else { a.max(b) };
        let lo = if self.hits(-FRAC_PI_2) { -1.0 } else { a.min(b) };
        Interval::new(lo, hi)
    }

    fn cos(self) -> Self {
        if self.width().is_nan() || self.width() >= 2.0 * PI {
            return Interval::new(-1.0, 1.0);
        }
        let (a, b) = (self.lo.cos(), self.hi.cos());
        let hi = if self.hits(0.0) { 1.0 } else { a.max(b) };
        let lo = if self.hits(PI) { -1.0 } else { a.min(b) };
        Interval::new(lo, hi)
    }
}

pub fn box_to_intervals(b: &HyperRect) -> Vec<Interval> {
    b.lo().iter().zip(b.hi()).map(|(l, h)| Interval::new(*l, *h)).collect()
}

pub fn intervals_to_box(iv: &[Interval]) -> HyperRect {
    HyperRect::new(iv.iter().map(|i| i.lo).collect(), iv.iter().map(|i| i.hi).collect())
        .expect("same length by construction")
}

fn check_pair(a: &HyperRect, b: &HyperRect) -> Result<(), GeometryError> {
    if a.dim() != b.dim() {
        return Err(GeometryError::DimensionMismatch(a.dim(), b.dim()));
    }
    if a.is_empty() || b.is_empty() {
        return Err(GeometryError::EmptyOperand);
    }
    Ok(())
}

/// `a ⊕ b = [a.lo + b.lo, a.hi + b.hi]`.
pub fn minkowski_sum(a: &HyperRect, b: &HyperRect) -> Result<HyperRect, GeometryError> {
    check_pair(a, b)?;
    let lo = a.lo().iter().zip(b.lo()).map(|(x, y)| x + y).collect();
    let hi = a.hi().iter().zip(b.hi()).map(|(x, y)| x + y).collect();
    Ok(HyperRect::new(lo, hi).expect("same dimension"))
}

/// `d_under ⊖ (−phi)`: the points `y` with `y − x ∈ d_under` for every
/// `x ∈ phi`, i.e. `[d.lo + phi.hi, d.hi + phi.lo]`. Empty (canonically) when
/// `phi` is wider than `d_under` in some dimension.
pub fn minkowski_diff_negated(d_under: &HyperRect, phi: &HyperRect) -> Result<HyperRect, GeometryError> {
    check_pair(d_under, phi)?;
    let lo = d_under.lo().iter().zip(phi.hi()).map(|(x, y)| x + y).collect();
    let hi = d_under.hi().iter().zip(phi.lo()).map(|(x, y)| x + y).collect();
    let out = HyperRect::new(lo, hi).expect("same dimension");
    if out.is_empty() {
        Ok(HyperRect::empty(d_under.dim()))
    } else {
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReachKind {
    IntervalExtension,
    DecompositionFunction,
}

/// Over-approximates the image of a closed box under the nominal map for a
/// fixed input. The returned box must contain `{f(s, u) : s ∈ cell}`.
pub trait BoxMap: Send + Sync {
    fn kind(&self) -> ReachKind;
    fn reach(&self, cell: &HyperRect, input: usize) -> Result<HyperRect, GeometryError>;
}

type IntervalFn = dyn Fn(&[Interval], usize) -> Vec<Interval> + Send + Sync;
type DecompFn = dyn Fn(&[f64], &[f64], usize) -> Vec<f64> + Send + Sync;

/// Natural interval extension of a map expressed over [`Interval`]s.
pub struct IntervalExtension {
    f: Box<IntervalFn>,
}

impl IntervalExtension {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&[Interval], usize) -> Vec<Interval> + Send + Sync + 'static,
    {
        Self { f: Box::new(f) }
    }
}

impl BoxMap for IntervalExtension {
    fn kind(&self) -> ReachKind {
        ReachKind::IntervalExtension
    }

    fn reach(&self, cell: &HyperRect, input: usize) -> Result<HyperRect, GeometryError> {
        let out = (self.f)(&box_to_intervals(cell), input);
        if let Some(bad) = out
            .iter()
            .find(|i| !i.is_valid() || !i.lo.is_finite() || !i.hi.is_finite())
        {
            return Err(GeometryError::EvaluationFailed {
                cell: cell.clone(),
                input,
                reason: format!("non-finite or inverted bound {bad}"),
            });
        }
        Ok(intervals_to_box(&out))
    }
}

/// Reach sets from a decomposition function `h_u(x, y)` of a mixed-monotone
/// map: the image of `[a, b]` is enclosed by `[h_u(a, b), h_u(b, a)]`.
pub struct DecompositionFunction {
    h: Box<DecompFn>,
}

impl DecompositionFunction {
    pub fn new<H>(h: H) -> Self
    where
        H: Fn(&[f64], &[f64], usize) -> Vec<f64> + Send + Sync + 'static,
    {
        Self { h: Box::new(h) }
    }
}

impl BoxMap for DecompositionFunction {
    fn kind(&self) -> ReachKind {
        ReachKind::DecompositionFunction
    }

    fn reach(&self, cell: &HyperRect, input: usize) -> Result<HyperRect, GeometryError> {
        let lo = (self.h)(cell.lo(), cell.hi(), input);
        let hi = (self.h)(cell.hi(), cell.lo(), input);
        let out = HyperRect::new(lo, hi).map_err(|e| GeometryError::EvaluationFailed {
            cell: cell.clone(),
            input,
            reason: e.to_string(),
        })?;
        if out.is_empty() || out.lo().iter().chain(out.hi()).any(|x| !x.is_finite()) {
            return Err(GeometryError::EvaluationFailed {
                cell: cell.clone(),
                input,
                reason: "decomposition function is not order-preserving here".into(),
            });
        }
        Ok(out)
    }
}

/// Over-approximation of the nominal reach set of a non-empty closed cell.
pub fn reach_box(m: &dyn BoxMap, cell: &HyperRect, input: usize) -> Result<HyperRect, GeometryError> {
    if cell.is_empty() {
        return Err(GeometryError::EmptyOperand);
    }
    m.reach(cell, input)
}
