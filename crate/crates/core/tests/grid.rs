mod common;

use std::f64::consts::PI;

use common::rng;
use proptest::prelude::*;
use rand::Rng;
use stochabs_core::grid::{angular_width, GridError};
use stochabs_core::{AbstractSet, CellId, Grid, HyperRect};

fn vehicle_grid(obstacles: Vec<HyperRect>) -> Grid {
    Grid::new(
        HyperRect::new(vec![0.0, 0.0, -PI], vec![2.0, 3.0, PI]).unwrap(),
        vec![0.1, 0.1, angular_width(63)],
        vec![false, false, true],
        obstacles,
    )
    .unwrap()
}

/// Half-open membership, with the top cell of a non-periodic dimension closed.
fn in_half_open(g: &Grid, c: usize, s: &[f64]) -> bool {
    let b = g.cell_box(CellId::Cell(c)).unwrap();
    let coords = g.coords(c);
    (0..g.dim()).all(|d| {
        let top = coords[d] + 1 == g.cells_per_dim()[d] && !g.periodic()[d];
        b.lo()[d] <= s[d] && (s[d] < b.hi()[d] || (top && s[d] <= b.hi()[d]))
    })
}

#[test]
fn quantizer_partitions_the_region() {
    let g = vehicle_grid(vec![]);
    let mut r = rng(5);
    for _ in 0..100_000 {
        let s: Vec<f64> = (0..3)
            .map(|d| r.random_range(g.region().lo()[d]..g.region().hi()[d]))
            .collect();
        let CellId::Cell(c) = g.quantize(&s) else {
            panic!("{s:?} mapped to the sink")
        };
        assert!(in_half_open(&g, c, &s), "{s:?} not in cell {c}");
        // No other cell contains the state: its neighbours along each axis
        // are the only candidates.
        let coords = g.coords(c);
        for d in 0..3 {
            for delta in [-1i64, 1] {
                let k = coords[d] as i64 + delta;
                if k < 0 || k >= g.cells_per_dim()[d] as i64 {
                    continue;
                }
                let mut other = coords.clone();
                other[d] = k as usize;
                assert!(!in_half_open(&g, g.cell_of_coords(&other), &s));
            }
        }
    }
}

#[test]
fn boundary_states() {
    let g = Grid::new(
        HyperRect::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
        vec![0.5, 0.5],
        vec![false; 2],
        vec![],
    )
    .unwrap();
    assert_eq!(g.cell_count(), 4);
    assert_eq!(g.quantize(&[0.5, 0.0]), CellId::Cell(g.cell_of_coords(&[1, 0])));
    assert_eq!(g.quantize(&[1.0, 1.0]), CellId::Cell(3));
    assert_eq!(g.quantize(&[1.0 + 1e-12, 0.2]), CellId::Sink);
    assert_eq!(g.quantize(&[-1e-12, 0.2]), CellId::Sink);
    assert_eq!(g.quantize(&[f64::NAN, 0.2]), CellId::Sink);
}

#[test]
fn periodic_dimension_wraps() {
    let g = vehicle_grid(vec![]);
    let a = g.quantize(&[0.55, 1.25, PI + 0.01]);
    let b = g.quantize(&[0.55, 1.25, -PI + 0.01]);
    assert_eq!(a, b);
    assert_eq!(g.quantize(&[0.55, 1.25, PI]), g.quantize(&[0.55, 1.25, -PI]));
    assert!((g.wrap(2, 3.0 * PI) - (-PI)).abs() < 1e-12);
}

#[test]
fn volumes() {
    let g = vehicle_grid(vec![]);
    let total = g.volume(&g.free_cells()).unwrap();
    assert!((total - g.region().volume()).abs() <= 1e-9 * total);

    let ob = HyperRect::new(vec![0.8, 1.0, -PI], vec![1.2, 1.4, PI]).unwrap();
    let g = vehicle_grid(vec![ob.clone()]);
    let blocked = (0..g.cell_count()).filter(|&c| g.is_blocked(c)).count();
    assert_eq!(blocked, 4 * 4 * 63);
    let free = g.volume(&g.free_cells()).unwrap();
    let expected = g.region().volume() - ob.volume();
    assert!((free - expected).abs() <= 1e-9 * expected);
    assert_eq!(g.quantize(&[1.0, 1.2, 0.0]), CellId::Sink);

    let with_sink = AbstractSet::from_indices(g.state_count(), [g.sink_index()]);
    assert_eq!(g.volume(&with_sink), Err(GridError::SinkInSet));
}

#[test]
fn obstacles_snap_outward() {
    let ob = HyperRect::new(vec![0.85, 1.05, -PI], vec![1.15, 1.35, PI]).unwrap();
    let g = vehicle_grid(vec![ob]);
    // Cells [0.8, 0.9) and [1.1, 1.2) touch the obstacle with positive volume.
    assert_eq!(g.quantize(&[0.81, 1.01, 0.0]), CellId::Sink);
    assert_eq!(g.quantize(&[1.19, 1.39, 0.0]), CellId::Sink);
    assert_ne!(g.quantize(&[0.79, 1.2, 0.0]), CellId::Sink);
}

#[test]
fn construction_errors() {
    let region = HyperRect::new(vec![0.0], vec![1.0]).unwrap();
    assert!(matches!(
        Grid::new(region.clone(), vec![0.3], vec![false], vec![]),
        Err(GridError::NotDivisible { .. })
    ));
    assert!(matches!(
        Grid::new(region.clone(), vec![0.0], vec![false], vec![]),
        Err(GridError::NonPositiveWidth { .. })
    ));
    assert!(matches!(
        Grid::new(region.clone(), vec![0.5, 0.5], vec![false], vec![]),
        Err(GridError::DimensionMismatch { .. })
    ));
    let outside = HyperRect::new(vec![0.5], vec![1.5]).unwrap();
    assert!(matches!(
        Grid::new(region, vec![0.5], vec![false], vec![outside]),
        Err(GridError::ObstacleOutside { .. })
    ));
}

proptest! {
    #[test]
    fn coordinates_round_trip(n0 in 1usize..8, n1 in 1usize..8, n2 in 1usize..8, pick in any::<usize>()) {
        let g = Grid::new(
            HyperRect::new(vec![0.0; 3], vec![n0 as f64, n1 as f64 * 0.5, n2 as f64 * 0.25]).unwrap(),
            vec![1.0, 0.5, 0.25],
            vec![false, true, false],
            vec![],
        ).unwrap();
        let c = pick % g.cell_count();
        prop_assert_eq!(g.cell_of_coords(&g.coords(c)), c);
        let centre = g.cell_box(CellId::Cell(c)).unwrap().center();
        prop_assert_eq!(g.quantize(&centre), CellId::Cell(c));
    }
}
