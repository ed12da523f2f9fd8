//! Square domains, node-centered grids, sampled fields and raster sets.
//!
//! Every later module works on these: window functions and weights are
//! [`RealField`]s, welded functions are [`ComplexField`]s and the sets
//! `Ω^{±ε}` are [`RasterSet`]s obtained by exact Euclidean distance transforms.

mod calculus;
mod field;
mod grid;
mod io;
mod raster;

use num_complex::Complex64;
use thiserror::Error;

pub use calculus::{dbar_fd, local_lipschitz, submean_test, subharmonicity_defect, SubmeanReport};
pub use field::{sample, sup_norm, ComplexField, Field, FieldValue, RealField};
pub use grid::{on_lattice, snap, Grid, Square};
pub use io::{heatmap_pgm, raster_pgm, read_container, write_container, write_csv, FieldIoError};
pub use raster::{Measure, RasterSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("square half edge must be positive and finite, got {half_edge}")]
    InvalidSquare { half_edge: f64 },
    #[error("grid spacing must be positive and finite, got {h}")]
    InvalidSpacing { h: f64 },
    #[error("grid needs at least 2 nodes per edge (3 for differences), got {n}")]
    TooFewNodes { n: usize },
    #[error("non-finite value at node ({i}, {j}) = {z}")]
    NonFinite { i: usize, j: usize, z: Complex64 },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("region is empty")]
    EmptyRegion,
    #[error("radius {r} is unresolvable at spacing {h} (need r >= 2h and a testable node)")]
    Resolution { r: f64, h: f64 },
}
