use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fields::{ComplexField, FieldError, Grid, Square};
use crate::shglue::GlueError;

/// `Σ c_k ((z - center) / scale)^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub center: Complex64,
    pub scale: f64,
    pub coeffs: Vec<Complex64>,
}

impl Polynomial {
    pub fn zero(center: Complex64, scale: f64) -> Self {
        Self { center, scale, coeffs: vec![Complex64::new(0.0, 0.0)] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let w = (z - self.center) / self.scale;
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * w + c)
    }

    pub fn eval_on(&self, grid: Grid) -> Result<ComplexField, FieldError> {
        ComplexField::sample(grid, |z| self.eval(z))
    }

    /// `ln max |P|` over the boundary of `sq`, sampled with `per_side` steps.
    /// By the maximum principle this is the maximum over the whole square.
    pub fn log_max_on_square(&self, sq: &Square, per_side: usize) -> f64 {
        let corners = sq.corners();
        (0..4)
            .into_par_iter()
            .map(|s| {
                let (a, b) = (corners[s], corners[(s + 1) % 4]);
                (0..=per_side).fold(f64::NEG_INFINITY, |m, k| {
                    let z = a + (b - a) * (k as f64 / per_side as f64);
                    m.max(self.eval(z).norm().ln())
                })
            })
            .reduce(|| f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionParams {
    pub degree: usize,
    /// Fit rows are taken on a sublattice coarse enough to stay below this count.
    pub max_fit_nodes: usize,
}

impl Default for ProjectionParams {
    fn default() -> Self {
        Self { degree: 16, max_fit_nodes: 150_000 }
    }
}

#[derive(Clone, Debug)]
pub struct Projection {
    pub poly: Polynomial,
    pub fit_nodes: usize,
    pub stride: usize,
    /// `|R_dd| / |R_00|` of the weighted Vandermonde factor.
    pub conditioning: f64,
}

/// Rows with relative weight below `e^{-LOG_CUT}` do not affect the fit in f64.
const LOG_CUT: f64 = 92.0;

/// Rows kept for a weighted fit: nodes with non-negligible weight on the
/// coarsest sublattice of stride `s` holding at most `max_rows` of them.
pub(crate) fn fit_rows(grid: &Grid, log_w: &[f64], max_rows: usize) -> (Vec<usize>, usize, f64) {
    let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let n = grid.n();
    let live = |k: usize| log_w[k] > top - LOG_CUT;
    let collect = |s: usize| -> Vec<usize> {
        (0..n).step_by(s).flat_map(|j| (0..n).step_by(s).map(move |i| j * n + i)).filter(|&k| live(k)).collect()
    };
    let mut stride = 1;
    let mut rows = collect(1);
    while rows.len() > max_rows.max(1) {
        stride += 1;
        rows = collect(stride);
    }
    (rows, stride, top)
}

/// Minimizes `Σ_rows w_k |target_k - Σ_c x_c b_c(k)|²` by Householder QR,
/// where `basis(r, out)` writes the `b_c` at the `r`-th row node.
/// Returns the coefficients and `min |R_cc| / |R_00|`.
pub(crate) fn weighted_lsq(
    rows: &[usize],
    cols: usize,
    basis: impl Fn(usize, &mut [Complex64]),
    target: &[Complex64],
    log_w: &[f64],
    top: f64,
) -> Result<(Vec<Complex64>, f64), GlueError> {
    if rows.len() < cols {
        return Err(GlueError::Input(format!("{} fit nodes for {cols} coefficients", rows.len())));
    }
    let mut a = DMatrix::<Complex64>::zeros(rows.len(), cols);
    let mut b = DVector::<Complex64>::zeros(rows.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); cols];
    for (r, &k) in rows.iter().enumerate() {
        let s = (0.5 * (log_w[k] - top)).exp();
        basis(r, &mut buf);
        for c in 0..cols {
            a[(r, c)] = buf[c] * s;
        }
        b[r] = target[k] * s;
    }
    let qr = a.qr();
    let rmat = qr.r();
    qr.q_tr_mul(&mut b);
    let rhs = b.rows(0, cols).into_owned();
    let diag0 = rmat[(0, 0)].norm();
    let diag_min = (0..cols).map(|c| rmat[(c, c)].norm()).fold(f64::INFINITY, f64::min);
    let x = rmat.solve_upper_triangular(&rhs).ok_or_else(|| GlueError::Input("singular weighted fit".into()))?;
    Ok((x.iter().cloned().collect(), diag_min / diag0))
}

/// Weighted least-squares projection of `g` onto polynomials of the given
/// degree; `log_w[k]` is the log of the quadrature weight at node `k`.
pub fn weighted_projection(g: &ComplexField, log_w: &[f64], params: &ProjectionParams) -> Result<Projection, GlueError> {
    let grid = *g.grid();
    if log_w.len() != grid.len() {
        return Err(FieldError::LengthMismatch { expected: grid.len(), got: log_w.len() }.into());
    }
    let sq = grid.square();
    let center = sq.center;
    let scale = sq.half_edge * std::f64::consts::SQRT_2;
    let (rows, stride, top) = fit_rows(&grid, log_w, params.max_fit_nodes);
    if !top.is_finite() {
        return Err(GlueError::Input("projection weight vanishes everywhere".into()));
    }
    let cols = params.degree + 1;
    let monomials = |r: usize, out: &mut [Complex64]| {
        let w = (grid.node_at(rows[r]) - center) / scale;
        let mut p = Complex64::new(1.0, 0.0);
        for o in out.iter_mut() {
            *o = p;
            p *= w;
        }
    };
    let (coeffs, conditioning) = weighted_lsq(&rows, cols, monomials, g.values(), log_w, top)?;
    Ok(Projection { poly: Polynomial { center, scale, coeffs }, fit_nodes: rows.len(), stride, conditioning })
}

/// `ln Σ_k |v_k|^2 e^{log_w[k]}`, `-inf` for a vanishing sum.
pub fn log_weighted_sq_norm(v: &[Complex64], log_w: &[f64]) -> f64 {
    let terms: Vec<f64> = v.iter().zip(log_w).map(|(x, &w)| 2.0 * x.norm().ln() + w).collect();
    log_sum_exp(&terms)
}

pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return top;
    }
    top + terms.iter().map(|&t| (t - top).exp()).sum::<f64>().ln()
}
