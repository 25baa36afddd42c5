//! Almost-sure Büchi controller synthesis for stochastic systems with
//! additive bounded noise.
//!
//! A uniform grid over the working region is abstracted into a finite
//! transition system with two relations: `F̄` over-approximates where a cell
//! can go, `F̲` keeps only the cells reached with probability uniformly
//! bounded below. Nested fixed points over these relations under- and
//! over-approximate the almost-sure winning region, and the abstract
//! controller is refined back to concrete states through the quantizer.

pub mod game;
pub mod geometry;
pub mod grid;
pub mod model;
pub mod set;
pub mod sim;
pub mod solver;

pub use game::{Relation, TransitionSystem};
pub use grid::{CellId, Grid, HyperRect};
pub use set::AbstractSet;
pub use solver::Controller;
