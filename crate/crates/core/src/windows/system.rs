use std::collections::BTreeMap;

use num_complex::Complex64;

use super::functions::{grid_fn, log_grid_fn, log_window_fn, window_fn};
use super::{Configuration, WindowError};
use crate::fields::{on_lattice, FieldError, Grid, RasterSet, RealField, Square};

/// Even-lattice cell `S_1(ω)` with `ω = 2p + 2qi`, stored as `(p, q)`.
pub type Cell = (i64, i64);

pub fn cell_center(cell: Cell) -> Complex64 {
    Complex64::new(2.0 * cell.0 as f64, 2.0 * cell.1 as f64)
}

/// Cell whose square contains `z` (ties on odd lines broken by rounding).
pub fn cell_of(z: Complex64) -> Cell {
    ((z.re / 2.0).round() as i64, (z.im / 2.0).round() as i64)
}

/// Cells whose squares meet the interior of `S_1(λ)`.
pub fn cells_meeting(lambda: Complex64) -> Vec<Cell> {
    let range = |t: f64| -> Vec<i64> {
        let lo = ((t - 2.0) / 2.0).floor() as i64;
        let hi = ((t + 2.0) / 2.0).ceil() as i64;
        (lo..=hi).filter(|&p| (t - 2.0 * p as f64).abs() < 2.0).collect()
    };
    let xs = range(lambda.re);
    let ys = range(lambda.im);
    let mut out = Vec::new();
    for &q in &ys {
        for &p in &xs {
            out.push((p, q));
        }
    }
    out
}

/// The local picture around one point: `v` and `D_λ = {v = 0} ∩ S_1(λ)`.
#[derive(Clone, Debug)]
pub struct Window {
    pub lambda: Complex64,
    /// Lattice grid on `S_{1 + 1/C + 2h}(λ)`.
    pub grid: Grid,
    pub v: RealField,
    pub d: RasterSet,
}

/// Assembled window function of a configuration.
///
/// `v` is evaluated pointwise as `max(v_0, max_{λ ∈ B^ω} v_λ)` in the cell of
/// the argument; each point additionally carries a sampled local window.
#[derive(Clone, Debug)]
pub struct WindowSystem {
    config: Configuration,
    h: f64,
    a_sets: Vec<Vec<Cell>>,
    b_sets: BTreeMap<Cell, Vec<usize>>,
    windows: Vec<Window>,
}

impl WindowSystem {
    /// Builds the system with local windows sampled at spacing `h`.
    ///
    /// Points must lie on the lattice `h Z^2` so that local windows, patch
    /// grids and larger domains share nodes.
    pub fn build(config: &Configuration, h: f64) -> Result<Self, WindowError> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(FieldError::InvalidSpacing { h }.into());
        }
        for (k, &p) in config.points().iter().enumerate() {
            if !on_lattice(p, h) {
                return Err(WindowError::OffLattice { index: k, point: p, h });
            }
        }
        let c = config.c();
        let mut a_sets = Vec::with_capacity(config.len());
        let mut b_sets: BTreeMap<Cell, Vec<usize>> = BTreeMap::new();
        for (k, &p) in config.points().iter().enumerate() {
            let a = cells_meeting(p);
            for &cell in &a {
                b_sets.entry(cell).or_default().push(k);
            }
            a_sets.push(a);
        }
        let mut sys = Self { config: config.clone(), h, a_sets, b_sets, windows: Vec::new() };
        let half = 1.0 + 1.0 / c + 2.0 * h;
        let windows: Result<Vec<Window>, WindowError> = config
            .points()
            .iter()
            .map(|&lambda| {
                let grid = Grid::on_lattice(lambda, half, h)?;
                let v = sys.sample(&grid)?;
                let s1 = Square::new(lambda, 1.0)?;
                let tol = 1e-9 * h;
                let mask = v
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(k, &x)| x == 0.0 && s1.contains_tol(grid.node_at(k), tol))
                    .collect();
                let d = RasterSet::from_mask(grid, mask)?;
                Ok(Window { lambda, grid, v, d })
            })
            .collect();
        sys.windows = windows?;
        Ok(sys)
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn c(&self) -> f64 {
        self.config.c()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    /// `A_λ` of the `k`-th point.
    pub fn a_set(&self, k: usize) -> &[Cell] {
        &self.a_sets[k]
    }

    /// `B^ω` (indices into the configuration).
    pub fn b_set(&self, cell: Cell) -> &[usize] {
        self.b_sets.get(&cell).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn b_sets(&self) -> &BTreeMap<Cell, Vec<usize>> {
        &self.b_sets
    }

    /// `v(z)`.
    pub fn eval(&self, z: Complex64) -> f64 {
        let c = self.c();
        let pts = self.config.points();
        let mut v = grid_fn(z, c);
        for &k in self.b_set(cell_of(z)) {
            v = v.max(window_fn(z, pts[k], c));
        }
        v
    }

    /// `ln v(z)`, `-inf` where `v = 0`.
    pub fn log_eval(&self, z: Complex64) -> f64 {
        let c = self.c();
        let pts = self.config.points();
        let mut v = log_grid_fn(z, c);
        for &k in self.b_set(cell_of(z)) {
            v = v.max(log_window_fn(z, pts[k], c));
        }
        v
    }

    /// `v` sampled on `grid`.
    pub fn sample(&self, grid: &Grid) -> Result<RealField, FieldError> {
        RealField::sample(*grid, |z| self.eval(z))
    }
}
