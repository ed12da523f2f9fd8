//! Strip function `b_C`, window functions `v_λ`, the odd-integer grid `v_0`
//! and the assembled subharmonic window field `v` with its checks P1 to P3.

mod checks;
mod config;
mod functions;
mod system;

use num_complex::Complex64;
use thiserror::Error;

pub use checks::{
    check_all, check_p1, check_p2, check_p2_on, check_p3, check_subharmonic, intruding_rectangles, p3_annulus,
    P1Entry, P2Entry, P3Entry, StripRect, SubharmonicEntry, WindowReport,
};
pub use config::{random_configuration, Configuration};
pub use functions::{
    base_window, grid_fn, log_base_window, log_cosh, log_grid_fn, log_window_fn, nearest_odd, window_fn,
};
pub use system::{cell_center, cell_of, cells_meeting, Cell, Window, WindowSystem};

use crate::fields::FieldError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WindowError {
    #[error("C must be finite and at least 1, got {c}")]
    InvalidC { c: f64 },
    #[error("points {i} ({a}) and {j} ({b}) are at ∞-distance {distance} <= 2")]
    Separation { i: usize, j: usize, a: Complex64, b: Complex64, distance: f64 },
    #[error("{labels} labels for {points} points")]
    LabelMismatch { points: usize, labels: usize },
    #[error("point {index} is not finite")]
    NonFinitePoint { index: usize },
    #[error("point {index} ({point}) is not on the lattice of spacing {h}")]
    OffLattice { index: usize, point: Complex64, h: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}
