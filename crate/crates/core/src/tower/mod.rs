//! Finite Rokhlin-tower model of a free plane action.
//!
//! The space is a flat torus of side `L` acting on itself by translation. A
//! base `B_n(0)` is a lattice of centers whose squares `S_{a_n}` are pairwise
//! disjoint, so tube measures are exact rectangle areas divided by `L²`.

mod hausdorff;
mod lattice;
mod model;
mod region;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::Square;

pub use hausdorff::{
    delta_fine_partition, directed_hausdorff, epsilon_net, fiber_distance, hausdorff, is_delta_fine, max_cell_distance,
    EpsilonNet, FiberSets, FiniteSetH, Partition,
};
pub use lattice::{
    corner_placement, four_corner_check, generate_geometry, nested_refinement, refinement_csv, BoundaryRow, CornerPlacement,
    CornerReport, FinalRow, LevelLattice, NestedTowers, NestingRow, RefinementReport, StepRow, TowerGeometry, TowerParams,
};
pub use model::{ClassModel, FiberModel, LevelModel, TowerModel};
pub use region::{Rect, RectRegion};

#[derive(Debug, Error)]
pub enum TowerError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("Hausdorff distance of an empty set")]
    Empty,
    #[error("cover does not cover: {0}")]
    Cover(String),
    #[error("model too large: {0}")]
    TooLarge(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ASequence {
    /// `a_1 .. a_N`.
    pub a: Vec<f64>,
    /// `Σ_{n<N} a_n / a_{n+1}`.
    pub ratio_sum: f64,
    /// `ratio_sum < 1/2`.
    pub hypothesis_ok: bool,
}

/// `a_1 = 1`, `a_n = D n ln²n a_{n-1}`.
pub fn a_sequence(d: f64, n: usize) -> Result<ASequence, TowerError> {
    if !(d > 0.0) || n == 0 {
        return Err(TowerError::Input(format!("need D > 0 and N >= 1, got D = {d}, N = {n}")));
    }
    let mut a = vec![1.0];
    for k in 2..=n {
        let kf = k as f64;
        a.push(d * kf * kf.ln().powi(2) * a[k - 2]);
    }
    Ok(sequence_from(a))
}

/// Ratio sum and hypothesis flag for an explicit edge sequence.
pub fn sequence_from(a: Vec<f64>) -> ASequence {
    let ratio_sum: f64 = a.windows(2).map(|w| w[0] / w[1]).sum();
    ASequence { hypothesis_ok: ratio_sum < 0.5, ratio_sum, a }
}

/// `μ(AB) = m(A)/m(S) μ(SB)`; parts of `A` outside `S` are clipped.
pub fn tube_measure(a: &RectRegion, s: &Square, mass: f64) -> f64 {
    let (clipped, cut) = a.clip(&Rect::from_square(s));
    if cut {
        log::warn!("tube_measure: region exceeds the square and was clipped");
    }
    tube_measure_of_area(clipped.area(), s, mass)
}

/// Tube measure for a set of known area inside `S`.
pub fn tube_measure_of_area(area: f64, s: &Square, mass: f64) -> f64 {
    area / s.area() * mass
}
