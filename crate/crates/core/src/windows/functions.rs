use std::f64::consts::PI;

use num_complex::Complex64;

/// `ln cosh x` without overflow.
pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Value of the strip profile `cos(πC/2 t) cosh(πC/2 s)` for `|t| < 1/C`, else 0.
#[inline]
fn strip(t: f64, s: f64, c: f64) -> f64 {
    if t.abs() < 1.0 / c {
        (0.5 * PI * c * t).cos() * (0.5 * PI * c * s).cosh()
    } else {
        0.0
    }
}

#[inline]
fn log_strip(t: f64, s: f64, c: f64) -> f64 {
    if t.abs() < 1.0 / c {
        (0.5 * PI * c * t).cos().ln() + log_cosh(0.5 * PI * c * s)
    } else {
        f64::NEG_INFINITY
    }
}

/// Base strip function `b_C`: positive and harmonic on `|Im z| < 1/C`, zero elsewhere.
pub fn base_window(z: Complex64, c: f64) -> f64 {
    strip(z.im, z.re, c)
}

pub fn log_base_window(z: Complex64, c: f64) -> f64 {
    log_strip(z.im, z.re, c)
}

/// Window function of `λ`: strips of half-width `1/C` along the four edges of `S_1(λ)`.
pub fn window_fn(z: Complex64, lambda: Complex64, c: f64) -> f64 {
    let w = z - lambda;
    strip(w.re + 1.0, w.im, c)
        .max(strip(w.im + 1.0, w.re, c))
        .max(strip(w.re - 1.0, w.im, c))
        .max(strip(w.im - 1.0, w.re, c))
}

pub fn log_window_fn(z: Complex64, lambda: Complex64, c: f64) -> f64 {
    let w = z - lambda;
    log_strip(w.re + 1.0, w.im, c)
        .max(log_strip(w.im + 1.0, w.re, c))
        .max(log_strip(w.re - 1.0, w.im, c))
        .max(log_strip(w.im - 1.0, w.re, c))
}

/// Nearest odd integer.
#[inline]
pub fn nearest_odd(t: f64) -> f64 {
    2.0 * ((t - 1.0) / 2.0).round() + 1.0
}

/// Grid function `v_0`: `e^{2πC}` times strips along every odd horizontal and vertical line.
pub fn grid_fn(z: Complex64, c: f64) -> f64 {
    let (kx, ky) = (nearest_odd(z.re), nearest_odd(z.im));
    let s = strip(z.im - ky, z.re, c).max(strip(z.re - kx, z.im, c));
    if s == 0.0 {
        0.0
    } else {
        (2.0 * PI * c).exp() * s
    }
}

pub fn log_grid_fn(z: Complex64, c: f64) -> f64 {
    let (kx, ky) = (nearest_odd(z.re), nearest_odd(z.im));
    2.0 * PI * c + log_strip(z.im - ky, z.re, c).max(log_strip(z.re - kx, z.im, c))
}
