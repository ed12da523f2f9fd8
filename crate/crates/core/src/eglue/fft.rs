use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::fields::{ComplexField, FieldError};

/// Square 2D FFT on an `m x m` row-major buffer.
pub(crate) struct Fft2 {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { m, fwd: planner.plan_fft_forward(m), inv: planner.plan_fft_inverse(m) }
    }

    fn transpose(&self, a: &mut [Complex64]) {
        let m = self.m;
        for j in 0..m {
            for i in j + 1..m {
                a.swap(j * m + i, i * m + j);
            }
        }
    }

    fn run(&self, a: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        plan.process(a);
        self.transpose(a);
        plan.process(a);
        self.transpose(a);
    }

    pub fn forward(&self, a: &mut [Complex64]) {
        self.run(a, &self.fwd);
    }

    /// Normalized inverse.
    pub fn inverse(&self, a: &mut [Complex64]) {
        self.run(a, &self.inv);
        let s = 1.0 / (self.m * self.m) as f64;
        a.iter_mut().for_each(|x| *x *= s);
    }
}

fn pad(values: &[Complex64], n: usize, m: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); m * m];
    for j in 0..n {
        buf[j * m..j * m + n].copy_from_slice(&values[j * n..(j + 1) * n]);
    }
    buf
}

fn restrict(buf: &[Complex64], n: usize, m: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        out.extend_from_slice(&buf[j * m..j * m + n]);
    }
    out
}

/// Discrete Cauchy transform `(1/π) Σ_w q(w) rhs(w) / (z - w)` over grid
/// nodes `w != z`, with quadrature weights `q`, by zero-padded FFT convolution.
pub fn cauchy_transform(rhs: &ComplexField) -> Result<ComplexField, FieldError> {
    let grid = *rhs.grid();
    let n = grid.n();
    let h = grid.h();
    let m = 2 * n;
    let fft = Fft2::new(m);
    let mut src: Vec<Complex64> = rhs.values().iter().enumerate().map(|(k, &v)| {
        let (i, j) = grid.ij(k);
        v * grid.quad_weight(i, j)
    }).collect();
    src = pad(&src, n, m);
    let mut ker = vec![Complex64::new(0.0, 0.0); m * m];
    let wrap = |d: isize| -> usize { d.rem_euclid(m as isize) as usize };
    let reach = n as isize - 1;
    for b in -reach..=reach {
        for a in -reach..=reach {
            if a == 0 && b == 0 {
                continue;
            }
            ker[wrap(b) * m + wrap(a)] = 1.0 / (PI * h * Complex64::new(a as f64, b as f64));
        }
    }
    fft.forward(&mut src);
    fft.forward(&mut ker);
    for (s, k) in src.iter_mut().zip(&ker) {
        *s *= k;
    }
    fft.inverse(&mut src);
    ComplexField::from_values(grid, restrict(&src, n, m))
}

/// Inverse of the central-difference `∂̄` on the doubled periodic grid, with
/// the four null modes (constant and checkerboards) dropped.
pub(crate) struct PeriodicDbar {
    n: usize,
    m: usize,
    fft: Fft2,
    inv_symbol: Vec<Complex64>,
}

impl PeriodicDbar {
    pub fn new(n: usize, h: f64) -> Self {
        let m = 2 * n;
        let mut inv_symbol = vec![Complex64::new(0.0, 0.0); m * m];
        for q in 0..m {
            let sq = (2.0 * PI * q as f64 / m as f64).sin();
            for p in 0..m {
                let sp = (2.0 * PI * p as f64 / m as f64).sin();
                let null = (p == 0 || 2 * p == m) && (q == 0 || 2 * q == m);
                if !null {
                    let sigma = Complex64::new(-sq, sp) / (2.0 * h);
                    inv_symbol[q * m + p] = 1.0 / sigma;
                }
            }
        }
        Self { n, m, fft: Fft2::new(m), inv_symbol }
    }

    pub fn apply(&self, d: &[Complex64]) -> Vec<Complex64> {
        let mut buf = pad(d, self.n, self.m);
        self.fft.forward(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.inv_symbol) {
            *b *= s;
        }
        self.fft.inverse(&mut buf);
        restrict(&buf, self.n, self.m)
    }
}
