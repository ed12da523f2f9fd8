use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ComplexField, FieldError, RealField};

/// `(∂x + i∂y)/2` by central differences, second-order one-sided at the boundary.
pub fn dbar_fd(g: &ComplexField) -> Result<ComplexField, FieldError> {
    let grid = *g.grid();
    let n = grid.n();
    if n < 3 {
        return Err(FieldError::TooFewNodes { n });
    }
    let h = grid.h();
    let v = g.values();
    let d = |k0: usize, stride: usize, pos: usize| -> Complex64 {
        if pos == 0 {
            (v[k0] * -3.0 + v[k0 + stride] * 4.0 - v[k0 + 2 * stride]) / (2.0 * h)
        } else if pos == n - 1 {
            (v[k0] * 3.0 - v[k0 - stride] * 4.0 + v[k0 - 2 * stride]) / (2.0 * h)
        } else {
            (v[k0 + stride] - v[k0 - stride]) / (2.0 * h)
        }
    };
    let out: Vec<Complex64> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % n, k / n);
            let dx = d(k, 1, i);
            let dy = d(k, n, j);
            (dx + Complex64::i() * dy) * 0.5
        })
        .collect();
    ComplexField::from_values(grid, out)
}

fn gradient_at(v: &[f64], n: usize, h: f64, ii: usize, jj: usize) -> f64 {
    let (il, ir) = (ii.saturating_sub(1), (ii + 1).min(n - 1));
    let (jl, jr) = (jj.saturating_sub(1), (jj + 1).min(n - 1));
    let gx = (v[jj * n + ir] - v[jj * n + il]) / ((ir - il) as f64 * h);
    let gy = (v[jr * n + ii] - v[jl * n + ii]) / ((jr - jl) as f64 * h);
    gx.hypot(gy)
}

fn gradient_magnitudes(u: &RealField) -> Vec<f64> {
    let (n, h, v) = (u.grid().n(), u.grid().h(), u.values());
    (0..n * n).into_par_iter().map(|k| gradient_at(v, n, h, k % n, k / n)).collect()
}

/// Largest central-difference gradient magnitude over the 3x3 block around `(i, j)`.
pub fn local_lipschitz(u: &RealField, i: usize, j: usize) -> f64 {
    let n = u.grid().n();
    let mut best = 0.0f64;
    for jj in j.saturating_sub(1)..=(j + 1).min(n - 1) {
        for ii in i.saturating_sub(1)..=(i + 1).min(n - 1) {
            best = best.max(gradient_at(u.values(), n, u.grid().h(), ii, jj));
        }
    }
    best
}

/// Outcome of the sub-mean-value test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmeanReport {
    pub radius: f64,
    pub tested: usize,
    /// Max over tested nodes of `u(c) - mean_circle(u)`.
    pub max_defect: f64,
    /// Max over tested nodes of `defect - tol(node)`; the test passes when `<= 0`.
    pub worst_excess: f64,
    pub failures: usize,
    pub tol_factor: f64,
}

impl SubmeanReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn circle_points(r: f64, h: f64) -> Vec<Complex64> {
    let k = ((4.0 * std::f64::consts::PI * r / h).ceil() as usize).max(16);
    (0..k)
        .map(|t| Complex64::from_polar(r, 2.0 * std::f64::consts::PI * t as f64 / k as f64))
        .collect()
}

/// Max over testable nodes of `u(center) - mean of u on the sampled r-circle`.
pub fn subharmonicity_defect(u: &RealField, r: f64) -> Result<f64, FieldError> {
    Ok(submean_test(u, r, 0.0)?.max_defect)
}

/// Sub-mean-value test with node tolerance `tol_factor * h * local Lipschitz`.
///
/// Only nodes whose `r`-circle lies inside the grid are tested.
pub fn submean_test(u: &RealField, r: f64, tol_factor: f64) -> Result<SubmeanReport, FieldError> {
    let grid = *u.grid();
    let h = grid.h();
    if r < 2.0 * h * (1.0 - 1e-12) {
        return Err(FieldError::Resolution { r, h });
    }
    let n = grid.n();
    let m = (r / h - 1e-9).ceil() as usize;
    if 2 * m + 1 > n {
        return Err(FieldError::Resolution { r, h });
    }
    // bilinear stencil of each circle point relative to its centre node
    let ni = n as isize;
    let stencil: Vec<([isize; 4], [f64; 4])> = circle_points(r, h)
        .iter()
        .map(|p| {
            // offsets within 1e-9 of a node use that node alone, so the
            // stencil never reaches past the tested margin
            let axis = |o: f64| {
                let near = o.round();
                if (o - near).abs() < 1e-9 {
                    (near as isize, 0, 0.0)
                } else {
                    (o.floor() as isize, 1, o - o.floor())
                }
            };
            let (di, si, tx) = axis(p.re / h);
            let (dj, sj, ty) = axis(p.im / h);
            let base = dj * ni + di;
            (
                [base, base + si, base + sj * ni, base + sj * ni + si],
                [(1.0 - ty) * (1.0 - tx), (1.0 - ty) * tx, ty * (1.0 - tx), ty * tx],
            )
        })
        .collect();
    let inv_len = 1.0 / stencil.len() as f64;
    let v = u.values();
    let grad = gradient_magnitudes(u);
    let rows: Vec<(usize, f64, f64, usize)> = (m..n - m)
        .into_par_iter()
        .map(|j| {
            let mut tested = 0;
            let mut max_def = f64::NEG_INFINITY;
            let mut worst = f64::NEG_INFINITY;
            let mut fails = 0;
            for i in m..n - m {
                let k = (j * n + i) as isize;
                let mut s = 0.0;
                for (off, w) in &stencil {
                    s += w[0] * v[(k + off[0]) as usize]
                        + w[1] * v[(k + off[1]) as usize]
                        + w[2] * v[(k + off[2]) as usize]
                        + w[3] * v[(k + off[3]) as usize];
                }
                let def = u.at(i, j) - s * inv_len;
                let scale = 1e-12 * (1.0 + u.at(i, j).abs());
                let mut lip = 0.0f64;
                for jj in j - 1..=j + 1 {
                    lip = lip.max(grad[jj * n + i - 1]).max(grad[jj * n + i]).max(grad[jj * n + i + 1]);
                }
                let tol = tol_factor * h * lip + scale;
                tested += 1;
                max_def = max_def.max(def);
                worst = worst.max(def - tol);
                if def > tol {
                    fails += 1;
                }
            }
            (tested, max_def, worst, fails)
        })
        .collect();
    let mut rep = SubmeanReport {
        radius: r,
        tested: 0,
        max_defect: f64::NEG_INFINITY,
        worst_excess: f64::NEG_INFINITY,
        failures: 0,
        tol_factor,
    };
    for (t, d, w, f) in rows {
        rep.tested += t;
        rep.max_defect = rep.max_defect.max(d);
        rep.worst_excess = rep.worst_excess.max(w);
        rep.failures += f;
    }
    if rep.tested == 0 {
        return Err(FieldError::Resolution { r, h });
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{sample, Square};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dbar_of_holomorphic_and_conjugate() {
        let sq = Square::centered(1.0).unwrap();
        let z = sample(sq, 65, |z| z).unwrap();
        assert!(dbar_fd(&z).unwrap().sup_norm(None).unwrap() < 1e-12);
        let zb: ComplexField = sample(sq, 65, |z| z.conj()).unwrap();
        let d = dbar_fd(&zb).unwrap();
        assert!(d.values().iter().all(|v| (v - 1.0).norm() < 1e-12));
    }

    #[test]
    fn dbar_of_modulus_squared_is_z() {
        let g: ComplexField = sample(Square::centered(1.0).unwrap(), 33, |z| c(z.norm_sqr(), 0.0)).unwrap();
        let d = dbar_fd(&g).unwrap();
        let grid = *g.grid();
        for k in 0..grid.len() {
            assert!((d.values()[k] - grid.node_at(k)).norm() < 1e-12);
        }
    }

    #[test]
    fn dbar_of_cubic_converges_second_order() {
        let err = |n: usize| {
            let g: ComplexField = sample(Square::centered(1.0).unwrap(), n, |z| z * z * z - z * 2.0).unwrap();
            dbar_fd(&g).unwrap().sup_norm(None).unwrap()
        };
        let (e1, e2) = (err(33), err(65));
        assert!(e1 / e2 >= 3.5, "ratio {}", e1 / e2);
    }

    #[test]
    fn defect_of_zero_and_harmonic() {
        let sq = Square::centered(1.0).unwrap();
        let zero: RealField = sample(sq, 41, |_| 0.0).unwrap();
        assert_eq!(subharmonicity_defect(&zero, 0.1).unwrap(), 0.0);
        let re: RealField = sample(sq, 81, |z| z.re).unwrap();
        let h = re.grid().h();
        assert!(subharmonicity_defect(&re, 4.0 * h).unwrap().abs() < 1e-12);
    }

    #[test]
    fn defect_of_concave_paraboloid_is_r_squared() {
        let sq = Square::centered(1.0).unwrap();
        let u: RealField = sample(sq, 201, |z| -z.norm_sqr()).unwrap();
        let r = 0.2;
        let d = subharmonicity_defect(&u, r).unwrap();
        let h = u.grid().h();
        assert!((d - r * r).abs() < 2.0 * h * h, "defect {d}");
        assert!(!submean_test(&u, r, 10.0).unwrap().passed());
    }

    #[test]
    fn radius_below_two_spacings_is_rejected() {
        let u: RealField = sample(Square::centered(1.0).unwrap(), 21, |_| 0.0).unwrap();
        assert!(matches!(subharmonicity_defect(&u, 0.15), Err(FieldError::Resolution { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn max_of_subharmonic_passes(
            a in -2.0f64..2.0, b in -2.0f64..2.0, cc in -1.0f64..1.0, k in 0.5f64..2.0
        ) {
            let sq = Square::centered(1.0).unwrap();
            let u1: RealField = sample(sq, 61, |z| a * z.re + b * z.im + cc).unwrap();
            let u2: RealField = sample(sq, 61, |z| k * z.norm_sqr() + (z * 1.3).exp().norm().ln()).unwrap();
            let m = u1.map(|z, v| v.max(k * z.norm_sqr() + (z * 1.3).exp().norm().ln())).unwrap();
            let r = 4.0 * u1.grid().h();
            prop_assert!(submean_test(&u1, r, 10.0).unwrap().passed());
            prop_assert!(submean_test(&u2, r, 10.0).unwrap().passed());
            prop_assert!(submean_test(&m, r, 20.0).unwrap().passed());
        }
    }
}
