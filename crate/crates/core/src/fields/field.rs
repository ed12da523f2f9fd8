use num_complex::Complex64;
use rayon::prelude::*;

use super::{FieldError, Grid, RasterSet, Square};

/// Scalar types a field can hold.
pub trait FieldValue: Copy + Send + Sync + std::fmt::Debug + PartialEq + 'static {
    fn is_finite_value(&self) -> bool;
    fn magnitude(&self) -> f64;
    fn zero() -> Self;
    fn scale(self, s: f64) -> Self;
    fn add(self, other: Self) -> Self;
    /// Real and imaginary parts, for serialization.
    fn parts(&self) -> (f64, f64);
    /// Inverse of `parts`; real fields drop the imaginary part.
    fn from_parts(re: f64, im: f64) -> Self;
    /// Container tag: 0 real, 1 complex.
    const KIND: u8;
}

impl FieldValue for f64 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn zero() -> Self {
        0.0
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn parts(&self) -> (f64, f64) {
        (*self, 0.0)
    }
    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }
    const KIND: u8 = 0;
}

impl FieldValue for Complex64 {
    fn is_finite_value(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn parts(&self) -> (f64, f64) {
        (self.re, self.im)
    }
    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }
    const KIND: u8 = 1;
}

/// Function sampled at the nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T: FieldValue> {
    grid: Grid,
    values: Vec<T>,
}

pub type RealField = Field<f64>;
pub type ComplexField = Field<Complex64>;

impl<T: FieldValue> Field<T> {
    pub fn from_values(grid: Grid, values: Vec<T>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite_value()) {
            let (i, j) = grid.ij(idx);
            return Err(FieldError::NonFinite { i, j, z: grid.node(i, j) });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![T::zero(); grid.len()] }
    }

    /// Samples `f` at every node.
    pub fn sample<F>(grid: Grid, f: F) -> Result<Self, FieldError>
    where
        F: Fn(Complex64) -> T + Sync,
    {
        let n = grid.n();
        let values: Vec<T> = (0..grid.len())
            .into_par_iter()
            .map(|idx| f(grid.node(idx % n, idx / n)))
            .collect();
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[self.grid.index(i, j)]
    }

    /// Pointwise map; fails if the result is not finite.
    pub fn map<U: FieldValue, F>(&self, f: F) -> Result<Field<U>, FieldError>
    where
        F: Fn(Complex64, T) -> U + Sync,
    {
        let n = self.grid.n();
        let grid = self.grid;
        let values: Vec<U> = self
            .values
            .par_iter()
            .enumerate()
            .map(|(idx, &v)| f(grid.node(idx % n, idx / n), v))
            .collect();
        Field::from_values(self.grid, values)
    }

    pub fn sup_norm(&self, region: Option<&RasterSet>) -> Result<f64, FieldError> {
        sup_norm(self, region)
    }
}

impl RealField {
    /// Bilinear interpolation at `z`; `None` outside the grid.
    pub fn bilinear(&self, z: Complex64) -> Option<f64> {
        let n = self.grid.n();
        let (fx, fy) = self.grid.coords(z);
        let last = (n - 1) as f64;
        if !(fx >= -1e-9 && fy >= -1e-9 && fx <= last + 1e-9 && fy <= last + 1e-9) {
            return None;
        }
        let fx = fx.clamp(0.0, last);
        let fy = fy.clamp(0.0, last);
        let i = (fx.floor() as usize).min(n - 2);
        let j = (fy.floor() as usize).min(n - 2);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let v = &self.values;
        let k = j * n + i;
        Some(
            (1.0 - ty) * ((1.0 - tx) * v[k] + tx * v[k + 1])
                + ty * ((1.0 - tx) * v[k + n] + tx * v[k + n + 1]),
        )
    }
}

/// Samples `f` on the `n x n` grid of `square`.
pub fn sample<T: FieldValue, F>(square: Square, n: usize, f: F) -> Result<Field<T>, FieldError>
where
    F: Fn(Complex64) -> T + Sync,
{
    Field::sample(Grid::new(square, n)?, f)
}

/// Max of `|value|` over the region, or the whole grid.
pub fn sup_norm<T: FieldValue>(f: &Field<T>, region: Option<&RasterSet>) -> Result<f64, FieldError> {
    match region {
        None => Ok(f.values.iter().fold(0.0, |m, v| m.max(v.magnitude()))),
        Some(r) => {
            if r.grid() != f.grid() {
                return Err(FieldError::GridMismatch);
            }
            let mut any = false;
            let mut m = 0.0f64;
            for (v, &inside) in f.values.iter().zip(r.mask()) {
                if inside {
                    any = true;
                    m = m.max(v.magnitude());
                }
            }
            if any {
                Ok(m)
            } else {
                Err(FieldError::EmptyRegion)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_on_three_nodes() {
        let f: ComplexField = sample(Square::centered(1.0).unwrap(), 3, |z| z).unwrap();
        assert_eq!(f.values().len(), 9);
        assert_eq!(f.at(2, 2), c(1.0, 1.0));
    }

    #[test]
    fn zero_on_two_nodes() {
        let f: RealField = sample(Square::centered(1.0).unwrap(), 2, |_| 0.0).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn modulus_squared_center_and_corner() {
        let f: RealField = sample(Square::centered(2.0).unwrap(), 5, |z| z.norm_sqr()).unwrap();
        assert_eq!(f.at(2, 2), 0.0);
        assert_eq!(f.at(4, 4), 8.0);
        assert_eq!(f.at(0, 4), 8.0);
    }

    #[test]
    fn non_finite_names_node() {
        let r: Result<RealField, _> = sample(Square::centered(1.0).unwrap(), 3, |z| 1.0 / z.re);
        match r {
            Err(FieldError::NonFinite { i, j, .. }) => assert_eq!((i, j), (1, 0)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sup_norms() {
        let z: ComplexField = sample(Square::centered(1.0).unwrap(), 11, |z| z).unwrap();
        assert!((z.sup_norm(None).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let zero: RealField = sample(Square::centered(1.0).unwrap(), 4, |_| 0.0).unwrap();
        assert_eq!(zero.sup_norm(None).unwrap(), 0.0);
        let sq: ComplexField = sample(Square::centered(2.0).unwrap(), 41, |z| z * z).unwrap();
        let inner = Square::centered(1.0).unwrap();
        let r = RasterSet::from_fn(*sq.grid(), |z| inner.contains_tol(z, 1e-12));
        assert!((sq.sup_norm(Some(&r)).unwrap() - 2.0).abs() < 1e-12);
        let empty = RasterSet::empty(*sq.grid());
        assert!(matches!(sq.sup_norm(Some(&empty)), Err(FieldError::EmptyRegion)));
    }

    #[test]
    fn bilinear_is_exact_on_affine() {
        let f: RealField = sample(Square::centered(1.0).unwrap(), 9, |z| 2.0 * z.re - z.im + 0.5).unwrap();
        let z = c(0.313, -0.77);
        assert!((f.bilinear(z).unwrap() - (2.0 * z.re - z.im + 0.5)).abs() < 1e-12);
        assert!(f.bilinear(c(1.5, 0.0)).is_none());
    }
}
