mod common;

use std::f64::consts::PI;

use common::rng;
use rand::Rng;
use stochabs_core::geometry::reach_box;
use stochabs_core::model::{build_abstraction, builtin_system, System, SystemModel, SystemParams};
use stochabs_core::{CellId, Grid, HyperRect, Relation, TransitionSystem};

fn continuous(name: &str) -> SystemModel {
    match builtin_system(name, &SystemParams::default()).unwrap() {
        System::Continuous(m) => m,
        System::Chain(_) => unreachable!(),
    }
}

fn vanderpol_grid() -> Grid {
    Grid::new(
        HyperRect::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap(),
        vec![0.1, 0.1],
        vec![false; 2],
        vec![],
    )
    .unwrap()
}

fn vehicle_grid() -> Grid {
    Grid::new(
        HyperRect::new(vec![0.0, 0.0, -PI], vec![2.0, 3.0, PI]).unwrap(),
        vec![0.2, 0.2, 2.0 * PI / 21.0],
        vec![false, false, true],
        vec![HyperRect::new(vec![0.8, 1.0, -PI], vec![1.2, 1.4, PI]).unwrap()],
    )
    .unwrap()
}

fn random_box<R: Rng>(r: &mut R, lo: &[f64], hi: &[f64], max_width: f64) -> HyperRect {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for d in 0..lo.len() {
        let w = r.random_range(1e-3..max_width);
        let x = r.random_range(lo[d]..hi[d] - w);
        a.push(x);
        b.push(x + w);
    }
    HyperRect::new(a, b).unwrap()
}

fn sub_box<R: Rng>(r: &mut R, outer: &HyperRect) -> HyperRect {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for d in 0..outer.dim() {
        let x = r.random_range(outer.lo()[d]..=outer.hi()[d]);
        let y = r.random_range(outer.lo()[d]..=outer.hi()[d]);
        a.push(x.min(y));
        b.push(x.max(y));
    }
    HyperRect::new(a, b).unwrap()
}

fn point_in<R: Rng>(r: &mut R, b: &HyperRect) -> Vec<f64> {
    (0..b.dim()).map(|d| r.random_range(b.lo()[d]..=b.hi()[d])).collect()
}

#[test]
fn reach_box_contains_sampled_images() {
    let mut r = rng(1);
    for (name, lo, hi) in [
        ("vanderpol", vec![-3.0, -3.0], vec![3.0, 3.0]),
        ("dubins", vec![0.0, 0.0, -PI], vec![2.0, 3.0, PI]),
    ] {
        let m = continuous(name);
        for _ in 0..100 {
            let cell = random_box(&mut r, &lo, &hi, 0.3);
            for u in 0..m.n_inputs() {
                let phi = reach_box(m.box_map(), &cell, u).unwrap();
                for _ in 0..1000 {
                    let s = point_in(&mut r, &cell);
                    assert!(phi.contains_point(&m.nominal(&s, u)), "{name} {cell} u={u}");
                }
            }
        }
    }
}

#[test]
fn reach_box_is_monotone_in_the_cell() {
    let mut r = rng(2);
    for (name, lo, hi) in [
        ("vanderpol", vec![-3.0, -3.0], vec![3.0, 3.0]),
        ("dubins", vec![0.0, 0.0, -PI], vec![2.0, 3.0, PI]),
    ] {
        let m = continuous(name);
        for _ in 0..200 {
            let outer = random_box(&mut r, &lo, &hi, 0.5);
            let inner = sub_box(&mut r, &outer);
            for u in 0..m.n_inputs() {
                let a = reach_box(m.box_map(), &inner, u).unwrap();
                let b = reach_box(m.box_map(), &outer, u).unwrap();
                assert!(b.contains(&a), "{name}: {inner} ⊆ {outer} but {a} ⊄ {b}");
            }
        }
    }
}

#[test]
fn oscillator_first_coordinate_on_a_corner_cell() {
    let m = continuous("vanderpol");
    let phi = reach_box(m.box_map(), &HyperRect::new(vec![0.0, 0.0], vec![0.1, 0.1]).unwrap(), 0).unwrap();
    assert!(phi.lo()[0].abs() < 1e-12);
    assert!((phi.hi()[0] - 0.11).abs() < 1e-12);
}

#[test]
fn vehicle_straight_motion_matches_dense_samples() {
    let m = continuous("dubins");
    let straight = m.inputs().iter().position(|u| u[0] == 0.0).unwrap();
    let cell = HyperRect::new(vec![0.0; 3], vec![0.1; 3]).unwrap();
    let phi = reach_box(m.box_map(), &cell, straight).unwrap();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let k = 22;
    for i in 0..k {
        for j in 0..k {
            for l in 0..k {
                let s = [
                    0.1 * i as f64 / (k - 1) as f64,
                    0.1 * j as f64 / (k - 1) as f64,
                    0.1 * l as f64 / (k - 1) as f64,
                ];
                let x = m.nominal(&s, straight)[0];
                assert!(phi.lo()[0] <= x && x <= phi.hi()[0]);
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
    }
    // Samples include the cell corners, where the extremes are attained.
    assert!((lo - 0.1 * 0.1f64.cos()).abs() < 1e-15);
    assert!((hi - 0.2).abs() < 1e-15);
    assert!((phi.lo()[0] - lo).abs() < 1e-9 && (phi.hi()[0] - hi).abs() < 1e-9);
}

fn cell_of(g: &Grid, s: &[f64]) -> usize {
    g.index_of(g.quantize(s))
}

/// Draws concrete transitions and checks them against `F̄`.
fn check_over_soundness(m: &SystemModel, g: &Grid, ts: &TransitionSystem, samples: usize, seed: u64) {
    let mut r = rng(seed);
    let free: Vec<usize> = (0..g.cell_count()).filter(|&c| !g.is_blocked(c)).collect();
    for _ in 0..samples {
        let c = free[r.random_range(0..free.len())];
        let b = g.cell_box(CellId::Cell(c)).unwrap();
        let s = point_in(&mut r, &b);
        let u = r.random_range(0..m.n_inputs());
        let mut next = m.step(&s, u, &mut r);
        g.wrap_state(&mut next);
        let t = cell_of(g, &next);
        assert!(
            ts.over(c, u).contains(&(t as u32)),
            "cell {c} input {u}: {s:?} -> {next:?} (cell {t})"
        );
    }
}

/// For every `F̲` edge and sampled source state, the successor cell must
/// receive positive mass: `(f(s) + D) ∩ cell` has positive volume, or for
/// the sink, `f(s) + D` has positive volume outside the free region.
fn check_under_soundness(m: &SystemModel, g: &Grid, ts: &TransitionSystem, points: usize, seed: u64) {
    let mut r = rng(seed);
    let d = m.noise_support();
    for c in (0..g.cell_count()).filter(|&c| !g.is_blocked(c)) {
        let b = g.cell_box(CellId::Cell(c)).unwrap();
        for u in 0..m.n_inputs() {
            let under = ts.under(c, u);
            if under.is_empty() {
                continue;
            }
            for k in 0..points {
                // First the corners, then random points of the closed cell.
                let s: Vec<f64> = if k < 1 << g.dim() {
                    (0..g.dim())
                        .map(|i| if k >> i & 1 == 1 { b.hi()[i] } else { b.lo()[i] })
                        .collect()
                } else {
                    point_in(&mut r, &b)
                };
                let f = m.nominal(&s, u);
                let spread = HyperRect::new(
                    f.iter().zip(d.lo()).map(|(x, w)| x + w).collect(),
                    f.iter().zip(d.hi()).map(|(x, w)| x + w).collect(),
                )
                .unwrap();
                for &t in under {
                    let t = t as usize;
                    if t == g.sink_index() {
                        let inside = g.region().intersection(&spread).volume();
                        assert!(spread.volume() - inside > 0.0 || g.obstacles().iter().any(|o| o.intersects(&spread)));
                        continue;
                    }
                    let mass = mass_with_wrap(g, &spread, t);
                    assert!(mass > 1e-15, "F̲({c}, {u}) ∋ {t} but no mass from {s:?}");
                }
            }
        }
    }
}

/// Volume of `spread ∩ cell t`, counting periodic copies of the cell.
fn mass_with_wrap(g: &Grid, spread: &HyperRect, t: usize) -> f64 {
    let cell = g.cell_box(CellId::Cell(t)).unwrap();
    let mut total = 0.0;
    let shifts: Vec<Vec<f64>> = (0..g.dim())
        .map(|d| {
            if g.periodic()[d] {
                let p = g.region().width(d);
                vec![-p, 0.0, p]
            } else {
                vec![0.0]
            }
        })
        .collect();
    let mut idx = vec![0usize; g.dim()];
    loop {
        let lo: Vec<f64> = (0..g.dim()).map(|d| cell.lo()[d] + shifts[d][idx[d]]).collect();
        let hi: Vec<f64> = (0..g.dim()).map(|d| cell.hi()[d] + shifts[d][idx[d]]).collect();
        let moved = HyperRect::new(lo, hi).unwrap();
        if moved.intersects(spread) {
            total += moved.intersection(spread).volume();
        }
        let mut d = 0;
        while d < g.dim() {
            idx[d] += 1;
            if idx[d] < shifts[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == g.dim() {
            return total;
        }
    }
}

fn check_containment(ts: &TransitionSystem) {
    for x in 0..ts.n_states() {
        for u in 0..ts.n_inputs() {
            let over = ts.successors(Relation::Over, x, u);
            assert!(!over.is_empty());
            assert!(ts.successors(Relation::Under, x, u).iter().all(|t| over.contains(t)));
        }
    }
}

#[test]
fn oscillator_abstraction_is_sound() {
    let m = continuous("vanderpol");
    let g = vanderpol_grid();
    let ts = build_abstraction(&m, &g).unwrap();
    check_containment(&ts);
    check_over_soundness(&m, &g, &ts, 200_000, 3);
    // A wider noise box gives F̲ edges to test on this grid.
    let wide = match builtin_system(
        "vanderpol",
        &SystemParams {
            noise: Some(HyperRect::symmetric(&[0.12, 0.12])),
            ..SystemParams::default()
        },
    )
    .unwrap()
    {
        System::Continuous(m) => m,
        System::Chain(_) => unreachable!(),
    };
    let ts = build_abstraction(&wide, &g).unwrap();
    assert!(ts.edge_count(Relation::Under) > g.cell_count());
    check_containment(&ts);
    check_over_soundness(&wide, &g, &ts, 100_000, 4);
    check_under_soundness(&wide, &g, &ts, 12, 5);
}

#[test]
fn vehicle_abstraction_is_sound() {
    let m = match builtin_system(
        "dubins",
        &SystemParams {
            noise: Some(HyperRect::symmetric(&[0.15, 0.15, 0.2])),
            ..SystemParams::default()
        },
    )
    .unwrap()
    {
        System::Continuous(m) => m,
        System::Chain(_) => unreachable!(),
    };
    let g = vehicle_grid();
    let ts = build_abstraction(&m, &g).unwrap();
    assert!(ts.edge_count(Relation::Under) > 0);
    check_containment(&ts);
    check_over_soundness(&m, &g, &ts, 100_000, 6);
    check_under_soundness(&m, &g, &ts, 10, 7);
}

#[test]
fn abstraction_is_deterministic() {
    let m = continuous("dubins");
    let g = vehicle_grid();
    assert_eq!(build_abstraction(&m, &g).unwrap(), build_abstraction(&m, &g).unwrap());
}

#[test]
fn blocked_cells_and_sink_are_absorbing() {
    let m = continuous("dubins");
    let g = vehicle_grid();
    let ts = build_abstraction(&m, &g).unwrap();
    let sink = g.sink_index() as u32;
    let blocked: Vec<usize> = (0..g.cell_count()).filter(|&c| g.is_blocked(c)).collect();
    assert!(!blocked.is_empty());
    for c in blocked.into_iter().chain([g.sink_index()]) {
        for u in 0..ts.n_inputs() {
            assert_eq!(ts.over(c, u), &[sink]);
            assert_eq!(ts.under(c, u), &[sink]);
        }
    }
    // Cells next to the obstacle can be pushed into it.
    let near = cell_of(&g, &[0.7, 1.1, 0.0]);
    assert!((0..ts.n_inputs()).all(|u| ts.over(near, u).contains(&sink)));
}

#[test]
fn heading_wraps_around() {
    let m = continuous("dubins");
    let g = vehicle_grid();
    let ts = build_abstraction(&m, &g).unwrap();
    let n = g.cells_per_dim()[2];
    let c = cell_of(&g, &[1.5, 2.0, PI - 0.05]);
    assert_eq!(g.coords(c)[2], n - 1);
    let left = m.inputs().iter().position(|u| u[0] == 1.0).unwrap();
    // Turning left from the last heading cell lands in low heading indices.
    let headings: Vec<usize> = ts
        .over(c, left)
        .iter()
        .filter(|&&t| (t as usize) < g.cell_count())
        .map(|&t| g.coords(t as usize)[2])
        .collect();
    assert!(!headings.is_empty());
    assert!(headings.iter().all(|&h| h < n / 2), "{headings:?}");
}

#[test]
fn boundary_contact_counts_as_leaving() {
    let m = continuous("vanderpol");
    let g = vanderpol_grid();
    let ts = build_abstraction(&m, &g).unwrap();
    let sink = g.sink_index() as u32;
    let corner = cell_of(&g, &[1.95, 1.95]);
    assert!(ts.over(corner, 0).contains(&sink));
    let centre = cell_of(&g, &[0.05, 0.05]);
    assert!(!ts.over(centre, 0).contains(&sink));
}
