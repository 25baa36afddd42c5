//! Statistical audit of the under-approximating relation.
//!
//! Every edge `x̂ → x̂′` of `F̲` promises a uniform lower bound `ε > 0` on the
//! one-step probability of entering `x̂′` from any state of `x̂`. For a kernel
//! that is continuous in the state, the bound has to hold on the closure of
//! the cell as well. The audit evaluates the exact one-step mass at sampled
//! states and reports the smallest value seen per edge.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FiniteCMP, NoiseKind, SystemModel};
use crate::game::TransitionSystem;
use crate::grid::{CellId, Grid, HyperRect};

/// One-step transition probabilities of a concrete system.
pub trait Kernel: Sync {
    /// Probability that one step from `s` under `u` lands in `target`.
    fn cell_mass(&self, g: &Grid, s: &[f64], u: usize, target: CellId) -> f64;

    /// Whether states on the cell boundary may be sampled (continuous
    /// kernels) or only states of the half-open cell.
    fn closed_cells(&self) -> bool;
}

impl SystemModel {
    /// Probability that `center + w` falls in `b`, `w` drawn from the noise.
    fn box_mass(&self, center: &[f64], b: &HyperRect, g: &Grid) -> f64 {
        let mut total = 1.0;
        for (i, &c) in center.iter().enumerate() {
            // Offsets relative to the nominal successor; periodic dimensions
            // also count the images one period away.
            let shifts: &[f64] = if g.periodic()[i] {
                let p = g.region().width(i);
                &[-p, 0.0, p][..]
            } else {
                &[0.0][..]
            };
            let mut m = 0.0;
            for shift in shifts {
                let lo = b.lo()[i] + shift - c;
                let hi = b.hi()[i] + shift - c;
                m += self.interval_mass(i, lo, hi);
            }
            total *= m.min(1.0);
        }
        total
    }

    /// Probability that noise coordinate `i` lies in `[lo, hi]`.
    fn interval_mass(&self, i: usize, lo: f64, hi: f64) -> f64 {
        let d = self.noise_support();
        let (dl, dh) = (d.lo()[i], d.hi()[i]);
        if d.width(i) == 0.0 {
            return if lo <= dl && dl <= hi { 1.0 } else { 0.0 };
        }
        let (a, b) = (lo.max(dl), hi.min(dh));
        if a >= b {
            return 0.0;
        }
        match self.noise_kind() {
            NoiseKind::Uniform => (b - a) / (dh - dl),
            NoiseKind::TruncatedGaussian { sigma } => {
                let cdf = |x: f64| 0.5 * (1.0 + libm::erf(x / (sigma[i] * std::f64::consts::SQRT_2)));
                (cdf(b) - cdf(a)) / (cdf(dh) - cdf(dl))
            }
        }
    }
}

impl Kernel for SystemModel {
    fn cell_mass(&self, g: &Grid, s: &[f64], u: usize, target: CellId) -> f64 {
        let center = self.nominal(s, u);
        match target {
            CellId::Cell(j) if g.is_blocked(j) => 0.0,
            CellId::Cell(j) => self.box_mass(&center, &g.cell_box_unchecked(j), g),
            CellId::Sink => {
                let inside = self.box_mass(&center, g.region(), g);
                let blocked: f64 = (0..g.cell_count())
                    .filter(|&j| g.is_blocked(j))
                    .map(|j| self.box_mass(&center, &g.cell_box_unchecked(j), g))
                    .sum();
                (1.0 - inside + blocked).clamp(0.0, 1.0)
            }
        }
    }

    fn closed_cells(&self) -> bool {
        true
    }
}

impl Kernel for FiniteCMP {
    fn cell_mass(&self, g: &Grid, s: &[f64], _u: usize, target: CellId) -> f64 {
        self.mass(g, s[0], target)
    }

    /// The chain kernel jumps at `s = 0` and `s = 1`, so only states of the
    /// half-open cell are meaningful.
    fn closed_cells(&self) -> bool {
        false
    }
}

/// Smallest sampled one-step mass of one `F̲` edge.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditEdge {
    pub cell: usize,
    pub input: usize,
    pub successor: usize,
    pub min_mass: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub pairs_checked: usize,
    pub samples_per_pair: usize,
    pub edges: Vec<AuditEdge>,
    /// Edges whose sampled minimum is zero: these contradict the relation.
    pub flagged: Vec<AuditEdge>,
}

impl AuditReport {
    /// Empirical `ε`: the smallest mass over all audited edges.
    pub fn epsilon(&self) -> Option<f64> {
        self.edges.iter().map(|e| e.min_mass).reduce(f64::min)
    }
}

/// Masses at or below this count as zero.
const ZERO_MASS: f64 = 1e-12;

/// Audits `F̲` edges of up to `max_pairs` (cell, input) pairs (all pairs when
/// `None`), evaluating the mass at the cell corners (closed cells only) plus
/// `samples` random states per pair.
pub fn check_fu_alternative<K: Kernel + ?Sized>(
    kernel: &K,
    g: &Grid,
    ts: &TransitionSystem,
    samples: usize,
    max_pairs: Option<usize>,
    seed: u64,
) -> AuditReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates: Vec<(usize, usize)> = (0..g.cell_count())
        .filter(|&c| !g.is_blocked(c))
        .flat_map(|c| (0..ts.n_inputs()).map(move |u| (c, u)))
        .filter(|&(c, u)| !ts.under(c, u).is_empty())
        .collect();
    let chosen: Vec<(usize, usize)> = match max_pairs {
        Some(k) if k < candidates.len() => {
            let mut ix = sample(&mut rng, candidates.len(), k).into_vec();
            ix.sort_unstable();
            ix.into_iter().map(|i| candidates[i]).collect()
        }
        _ => candidates,
    };

    let closed = kernel.closed_cells();
    let mut edges = Vec::new();
    let mut per_pair = 0;
    for &(c, u) in &chosen {
        let cell = g.cell_box_unchecked(c);
        let mut points = if closed {
            corners(&cell)
        } else {
            vec![cell.lo().to_vec()]
        };
        for _ in 0..samples {
            points.push(
                (0..cell.dim())
                    .map(|i| {
                        let (lo, hi) = (cell.lo()[i], cell.hi()[i]);
                        if closed {
                            rng.random_range(lo..=hi)
                        } else {
                            rng.random_range(lo..hi)
                        }
                    })
                    .collect(),
            );
        }
        per_pair = points.len();
        for &t in ts.under(c, u) {
            let target = g.id_of(t as usize);
            let min_mass = points
                .iter()
                .map(|s| kernel.cell_mass(g, s, u, target))
                .fold(f64::INFINITY, f64::min);
            edges.push(AuditEdge {
                cell: c,
                input: u,
                successor: t as usize,
                min_mass,
            });
        }
    }
    let flagged = edges.iter().filter(|e| e.min_mass <= ZERO_MASS).cloned().collect();
    AuditReport {
        pairs_checked: chosen.len(),
        samples_per_pair: per_pair,
        edges,
        flagged,
    }
}

fn corners(b: &HyperRect) -> Vec<Vec<f64>> {
    let n = b.dim();
    (0..1usize << n)
        .map(|mask| {
            (0..n)
                .map(|i| if mask >> i & 1 == 1 { b.hi()[i] } else { b.lo()[i] })
                .collect()
        })
        .collect()
}
