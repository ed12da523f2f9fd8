//! Entire gluing: cutoff `χ`, `g = g₀χ`, the weighted minimal `∂̄` correction
//! `α` and the checks E1, E2 of the welded `f = g - α`.

mod fft;
mod glue;
mod projection;
mod solve;

use num_complex::Complex64;

pub use fft::cauchy_transform;
pub use glue::{
    assemble_g, build_cutoff, dbar_g, check_cutoff, glue_entire, hypotheses, weld, AnalyticPatchSet, Cutoff, CutoffReport, E1Entry,
    GlueParams, GlueReport, GlueResult, HypothesisReport, LogCheck,
};
pub use projection::{log_sum_exp, log_weighted_sq_norm, weighted_projection, Polynomial, Projection, ProjectionParams};
pub use solve::{alpha_log_weights, rhs_log_weights, solve_dbar_min, DbarParams, DbarSolution};

pub use crate::shglue::GlueError;

/// `exp(-1/(1-|z|²))` on the open unit disc, 0 elsewhere.
pub fn bump(z: Complex64) -> f64 {
    let r2 = z.norm_sqr();
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}
