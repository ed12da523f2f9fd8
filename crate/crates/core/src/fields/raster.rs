use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{FieldError, Grid};

/// Boolean membership sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterSet {
    grid: Grid,
    mask: Vec<bool>,
}

/// Area of a raster set with its `perimeter * h` error bar.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    pub value: f64,
    pub error: f64,
}

impl RasterSet {
    pub fn from_mask(grid: Grid, mask: Vec<bool>) -> Result<Self, FieldError> {
        if mask.len() != grid.len() {
            return Err(FieldError::LengthMismatch { expected: grid.len(), got: mask.len() });
        }
        Ok(Self { grid, mask })
    }

    pub fn from_fn<F: Fn(Complex64) -> bool>(grid: Grid, f: F) -> Self {
        let mask = (0..grid.len()).map(|k| f(grid.node_at(k))).collect();
        Self { grid, mask }
    }

    pub fn empty(grid: Grid) -> Self {
        Self { grid, mask: vec![false; grid.len()] }
    }

    pub fn full(grid: Grid) -> Self {
        Self { grid, mask: vec![true; grid.len()] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.mask[self.grid.index(i, j)]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &b)| b).map(|(k, _)| k)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(bool, bool) -> bool) -> Result<Self, FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        let mask = self.mask.iter().zip(&other.mask).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid, mask })
    }

    pub fn union(&self, other: &Self) -> Result<Self, FieldError> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersect(&self, other: &Self) -> Result<Self, FieldError> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &Self) -> Result<Self, FieldError> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn complement(&self) -> Self {
        Self { grid: self.grid, mask: self.mask.iter().map(|b| !b).collect() }
    }

    pub fn is_subset(&self, other: &Self) -> Result<bool, FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        Ok(self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b))
    }

    /// Number of member/non-member 4-neighbour edges, the grid exterior
    /// counting as non-member.
    pub fn boundary_edges(&self) -> usize {
        let n = self.grid.n();
        let mut e = 0;
        for j in 0..n {
            for i in 0..n {
                if !self.mask[j * n + i] {
                    continue;
                }
                let nb = [
                    i == 0 || !self.mask[j * n + i - 1],
                    i + 1 == n || !self.mask[j * n + i + 1],
                    j == 0 || !self.mask[(j - 1) * n + i],
                    j + 1 == n || !self.mask[(j + 1) * n + i],
                ];
                e += nb.iter().filter(|&&b| b).count();
            }
        }
        e
    }

    /// Quadrature area of the member nodes with a `perimeter * h` error bar.
    pub fn measure(&self) -> Measure {
        let n = self.grid.n();
        let mut a = 0.0;
        for k in self.members() {
            a += self.grid.quad_weight(k % n, k / n);
        }
        let h = self.grid.h();
        Measure { value: a, error: self.boundary_edges() as f64 * h * h }
    }

    /// Squared Euclidean distances (in node units) to the nearest member.
    pub fn distance_sq_to_members(&self) -> Vec<f64> {
        let n = self.grid.n();
        let src: Vec<f64> = self.mask.iter().map(|&b| if b { 0.0 } else { f64::INFINITY }).collect();
        edt2(&src, n, n)
    }

    /// Squared distances to the nearest non-member, the grid exterior
    /// counting as non-member.
    pub fn distance_sq_to_complement(&self) -> Vec<f64> {
        let n = self.grid.n();
        let m = n + 2;
        let mut src = vec![0.0; m * m];
        for j in 0..n {
            for i in 0..n {
                if self.mask[j * n + i] {
                    src[(j + 1) * m + i + 1] = f64::INFINITY;
                }
            }
        }
        let d = edt2(&src, m, m);
        let mut out = vec![0.0; n * n];
        for j in 0..n {
            out[j * n..(j + 1) * n].copy_from_slice(&d[(j + 1) * m + 1..(j + 1) * m + 1 + n]);
        }
        out
    }

    /// Nodes within distance `eps` of a member node.
    pub fn dilate(&self, eps: f64) -> Self {
        let eps = eps.max(0.0);
        if self.is_empty() {
            return self.clone();
        }
        let r = eps / self.grid.h();
        let lim = r * r * (1.0 + 1e-12) + 1e-9;
        let d = self.distance_sq_to_members();
        Self { grid: self.grid, mask: d.iter().map(|&v| v <= lim).collect() }
    }

    /// Member nodes farther than `eps + h` from every non-member node.
    ///
    /// Raster distances overestimate continuum distances to the complement by
    /// up to one spacing, hence the extra `h`; with `eps = 0` this strips the
    /// members 4-adjacent to the complement.
    pub fn erode(&self, eps: f64) -> Self {
        let eps = eps.max(0.0);
        let r = eps / self.grid.h() + 1.0;
        let lim = r * r * (1.0 + 1e-12) + 1e-9;
        let d = self.distance_sq_to_complement();
        Self {
            grid: self.grid,
            mask: self.mask.iter().zip(&d).map(|(&b, &v)| b && v > lim).collect(),
        }
    }

    /// 4-connected component labels (`u32::MAX` for non-members) and count.
    pub fn components(&self) -> (Vec<u32>, usize) {
        let n = self.grid.n();
        let mut lab = vec![u32::MAX; n * n];
        let mut count = 0u32;
        let mut stack = Vec::new();
        for s in 0..n * n {
            if !self.mask[s] || lab[s] != u32::MAX {
                continue;
            }
            lab[s] = count;
            stack.push(s);
            while let Some(k) = stack.pop() {
                let (i, j) = (k % n, k / n);
                let mut push = |q: usize| {
                    if self.mask[q] && lab[q] == u32::MAX {
                        lab[q] = count;
                        stack.push(q);
                    }
                };
                if i > 0 {
                    push(k - 1);
                }
                if i + 1 < n {
                    push(k + 1);
                }
                if j > 0 {
                    push(k - n);
                }
                if j + 1 < n {
                    push(k + n);
                }
            }
            count += 1;
        }
        (lab, count as usize)
    }
}

/// One-dimensional squared distance transform (lower envelope of parabolas).
fn edt1(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    let first = match f.iter().position(|x| x.is_finite()) {
        Some(p) => p,
        None => {
            out.iter_mut().for_each(|o| *o = f64::INFINITY);
            return;
        }
    };
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Separable exact squared Euclidean distance transform on a `w x h` array.
fn edt2(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    let len = w.max(h);
    let mut v = vec![0usize; len];
    let mut z = vec![0.0; len + 1];
    let mut col = vec![0.0; h];
    let mut colo = vec![0.0; h];
    let mut tmp = src.to_vec();
    for i in 0..w {
        for j in 0..h {
            col[j] = tmp[j * w + i];
        }
        edt1(&col, &mut colo, &mut v, &mut z);
        for j in 0..h {
            tmp[j * w + i] = colo[j];
        }
    }
    let mut out = vec![0.0; w * h];
    for j in 0..h {
        edt1(&tmp[j * w..(j + 1) * w], &mut out[j * w..(j + 1) * w], &mut v, &mut z);
    }
    out
}
