use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::FieldError;

/// Axis-aligned closed square `center + [-a, a]^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Square {
    pub center: Complex64,
    pub half_edge: f64,
}

impl Square {
    pub fn new(center: Complex64, half_edge: f64) -> Result<Self, FieldError> {
        if !(half_edge > 0.0) || !half_edge.is_finite() || !center.re.is_finite() || !center.im.is_finite() {
            return Err(FieldError::InvalidSquare { half_edge });
        }
        Ok(Self { center, half_edge })
    }

    /// `S_a` centered at the origin.
    pub fn centered(half_edge: f64) -> Result<Self, FieldError> {
        Self::new(Complex64::new(0.0, 0.0), half_edge)
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_edge * self.half_edge
    }

    /// Chebyshev distance from the center.
    pub fn cheb(&self, z: Complex64) -> f64 {
        let d = z - self.center;
        d.re.abs().max(d.im.abs())
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.cheb(z) <= self.half_edge
    }

    pub fn contains_tol(&self, z: Complex64, tol: f64) -> bool {
        self.cheb(z) <= self.half_edge + tol
    }

    pub fn contains_square(&self, other: &Square) -> bool {
        self.cheb(other.center) + other.half_edge <= self.half_edge * (1.0 + 1e-14)
    }

    /// Interiors intersect.
    pub fn overlaps(&self, other: &Square) -> bool {
        self.cheb(other.center) < self.half_edge + other.half_edge
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.center.re - self.half_edge, self.center.re + self.half_edge)
    }

    pub fn y_range(&self) -> (f64, f64) {
        (self.center.im - self.half_edge, self.center.im + self.half_edge)
    }

    pub fn corners(&self) -> [Complex64; 4] {
        let a = self.half_edge;
        [
            self.center + Complex64::new(-a, -a),
            self.center + Complex64::new(a, -a),
            self.center + Complex64::new(a, a),
            self.center + Complex64::new(-a, a),
        ]
    }
}

/// Node-centered uniform grid on a square, corners included.
///
/// Nodes are stored row-major with `x` varying fastest: index `j * n + i`
/// holds the node `(x_i, y_j)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    square: Square,
    n: usize,
}

impl Grid {
    pub fn new(square: Square, n: usize) -> Result<Self, FieldError> {
        if n < 2 {
            return Err(FieldError::TooFewNodes { n });
        }
        Ok(Self { square, n })
    }

    /// Grid whose nodes lie on the lattice `h * Z^2`.
    ///
    /// The center is snapped to the nearest lattice point and the half edge is
    /// rounded up to a multiple of `h`, so the result covers `S_half_edge(center)`
    /// whenever `center` is already a lattice point.
    pub fn on_lattice(center: Complex64, half_edge: f64, h: f64) -> Result<Self, FieldError> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(FieldError::InvalidSpacing { h });
        }
        let c = snap(center, h);
        let m = (half_edge / h - 1e-9).ceil().max(1.0) as usize;
        let sq = Square::new(c, m as f64 * h)?;
        Self::new(sq, 2 * m + 1)
    }

    pub fn square(&self) -> &Square {
        &self.square
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        2.0 * self.square.half_edge / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.square.center.re - self.square.half_edge + i as f64 * self.h()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.square.center.im - self.square.half_edge + j as f64 * self.h()
    }

    pub fn node(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.x(i), self.y(j))
    }

    pub fn node_at(&self, idx: usize) -> Complex64 {
        self.node(idx % self.n, idx / self.n)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.n, idx / self.n)
    }

    /// Fractional grid coordinates of `z`.
    pub fn coords(&self, z: Complex64) -> (f64, f64) {
        let h = self.h();
        let x0 = self.square.center.re - self.square.half_edge;
        let y0 = self.square.center.im - self.square.half_edge;
        ((z.re - x0) / h, (z.im - y0) / h)
    }

    pub fn nearest(&self, z: Complex64) -> Option<(usize, usize)> {
        let (fx, fy) = self.coords(z);
        let (i, j) = (fx.round(), fy.round());
        let last = (self.n - 1) as f64;
        if i < 0.0 || j < 0.0 || i > last || j > last {
            return None;
        }
        Some((i as usize, j as usize))
    }

    /// Index offset `(di, dj)` such that node `(i, j)` of `self` is node
    /// `(i + di, j + dj)` of `outer`, when both grids share spacing and lattice.
    pub fn offset_in(&self, outer: &Grid) -> Option<(isize, isize)> {
        let (h, ho) = (self.h(), outer.h());
        if ((h - ho) / ho).abs() > 1e-9 {
            return None;
        }
        let (fx, fy) = outer.coords(self.node(0, 0));
        let (ri, rj) = (fx.round(), fy.round());
        if (fx - ri).abs() > 1e-6 || (fy - rj).abs() > 1e-6 {
            return None;
        }
        Some((ri as isize, rj as isize))
    }

    /// Sub-grid of `self` covering `sq` (clipped), sharing nodes with `self`.
    pub fn subgrid(&self, sq: &Square) -> Option<(Grid, (usize, usize))> {
        let (x0, x1) = sq.x_range();
        let (y0, y1) = sq.y_range();
        let (fx0, fy0) = self.coords(Complex64::new(x0, y0));
        let (fx1, fy1) = self.coords(Complex64::new(x1, y1));
        let last = (self.n - 1) as f64;
        let i0 = (fx0 + 1e-9).floor().max(0.0);
        let j0 = (fy0 + 1e-9).floor().max(0.0);
        let i1 = (fx1 - 1e-9).ceil().min(last);
        let j1 = (fy1 - 1e-9).ceil().min(last);
        let m = (i1 - i0).max(j1 - j0);
        if m < 1.0 {
            return None;
        }
        let (i0, j0, m) = (i0 as usize, j0 as usize, m as usize);
        let m = m.min(self.n - 1 - i0).min(self.n - 1 - j0);
        if m < 1 {
            return None;
        }
        let h = self.h();
        let lo = self.node(i0, j0);
        let half = m as f64 * h / 2.0;
        let sq = Square::new(lo + Complex64::new(half, half), half).ok()?;
        Some((Grid::new(sq, m + 1).ok()?, (i0, j0)))
    }

    /// Quadrature weight of node `(i, j)`: `h^2`, halved per boundary axis.
    pub fn quad_weight(&self, i: usize, j: usize) -> f64 {
        let h = self.h();
        let last = self.n - 1;
        let wx = if i == 0 || i == last { 0.5 } else { 1.0 };
        let wy = if j == 0 || j == last { 0.5 } else { 1.0 };
        h * h * wx * wy
    }
}

/// Nearest point of `h * Z^2`.
pub fn snap(z: Complex64, h: f64) -> Complex64 {
    Complex64::new((z.re / h).round() * h, (z.im / h).round() * h)
}

/// True when `z` is within `1e-6 h` of a lattice point of `h * Z^2`.
pub fn on_lattice(z: Complex64, h: f64) -> bool {
    let (fx, fy) = (z.re / h, z.im / h);
    (fx - fx.round()).abs() < 1e-6 && (fy - fy.round()).abs() < 1e-6
}
