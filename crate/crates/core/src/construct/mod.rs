//! Inductive construction of `F_n` over a tower model, its property checks
//! and the log-space growth ledger.
//!
//! Coordinates: `F_n^j` is evaluated at `u ∈ S_{a_n}` relative to the class
//! representative. A welded level stores a polynomial in the scaled variable
//! `z = u / a_{n-1}`, the variable of the window configuration `Λ_n^j`.

mod ledger;
mod pipeline;
mod properties;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{ComplexField, FieldError, Square};
use crate::shglue::GlueError;
use crate::tower::{tube_measure_of_area, TowerError};

pub use ledger::{growth_ledger, GrowthLedger, LedgerGrid, LedgerParams, LedgerRow, Neumaier};
pub use pipeline::{
    build_next, desk_log_mb, level_one, run_pipeline, DeskLayout, EntireFn, FClass, FLevel, FSequence, GoodWindow, PipelineConfig,
    PipelineRun,
};
pub use properties::{
    check_properties, AReport, B1Report, B3Report, B4Report, B5Report, LevelProperties, NonconstancyReport, PropertyReport,
    TelescopingReport,
};

#[derive(Debug, Error)]
pub enum ConstructError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Tower(#[from] TowerError),
    #[error("level {level}, class {class}: {source}")]
    Glue {
        level: usize,
        class: usize,
        #[source]
        source: GlueError,
    },
}

/// `F_1(T_z x) = z`.
pub fn f1(z: Complex64) -> Complex64 {
    z
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Measures {
    /// `μ(S_{a_1} B_1)`.
    pub mass: f64,
    /// `μ(|F_1| <= 1/4) = (π/4³) · mass`.
    pub small: f64,
    /// `μ(|F_1| >= 3/4) = (1 - 9π/64) · mass`.
    pub large: f64,
    pub small_ok: bool,
    pub large_ok: bool,
}

/// Level-sets of `F_1` on a tower of mass `mass` with `a_1 = 1`.
pub fn f1_measures(mass: f64) -> Result<F1Measures, ConstructError> {
    let s1 = Square::centered(1.0)?;
    let small = tube_measure_of_area(PI / 16.0, &s1, mass);
    let large = tube_measure_of_area(4.0 - 9.0 * PI / 16.0, &s1, mass);
    Ok(F1Measures { mass, small, large, small_ok: small >= 1.0 / 25.0, large_ok: large >= 1.0 / 25.0 })
}

/// `Σ_{k>=2} 1/(k ln²k)`: partial sum to `10⁶` plus the integral tail.
pub fn loss_series() -> f64 {
    const K: u64 = 1_000_000;
    let mut s = Neumaier::default();
    for k in (2..=K).rev() {
        let kf = k as f64;
        s.add(1.0 / (kf * kf.ln().powi(2)));
    }
    s.value() + 1.0 / (K as f64 + 0.5).ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainBound {
    pub f1_small: f64,
    /// `2 μ(X \ X_1)`.
    pub base_loss: f64,
    pub loss_sum: f64,
    /// Lower bound for `μ(|F_n| <= 1/3)`.
    pub bound: f64,
    pub passed: bool,
}

/// `μ(|F_n| <= 1/3) >= μ(|F_1| <= 1/4) - 2μ(X \ X_1) - loss_sum >= 1/100`.
pub fn nonconstancy_chain(mass1: f64, loss_sum: f64) -> Result<ChainBound, ConstructError> {
    let f = f1_measures(mass1)?;
    let base_loss = 2.0 * (1.0 - mass1).max(0.0);
    let bound = f.small - base_loss - loss_sum;
    Ok(ChainBound { f1_small: f.small, base_loss, loss_sum, bound, passed: bound >= 0.01 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    /// `10^{-2n}/2`.
    pub target: f64,
    pub delta: f64,
    /// Sampled `sup_{|z-w| <= δ} |F(z) - F(w)|` at the returned `δ`.
    pub achieved: f64,
    /// The grid could not resolve the target; `δ = target / lipschitz`.
    pub extrapolated: bool,
    /// Largest neighbour difference over `h`.
    pub lipschitz: f64,
}

/// `δ_n` for `sup_{|z-w|<δ} |F(z) - F(w)| < 10^{-2n}/2` over every field.
pub fn modulus_delta(fields: &[ComplexField], n: usize) -> Result<ModulusReport, ConstructError> {
    modulus_delta_for(fields, 0.5 * 10f64.powi(-2 * n as i32))
}

/// Largest `δ = kh <= 1` whose sampled modulus over node pairs at distance
/// `<= kh` stays below `tau`; see [`ModulusReport`] for the fallback.
pub fn modulus_delta_for(fields: &[ComplexField], tau: f64) -> Result<ModulusReport, ConstructError> {
    if !(tau > 0.0) {
        return Err(ConstructError::Input(format!("modulus target must be positive, got {tau}")));
    }
    let mut best = ModulusReport { target: tau, delta: 1.0, achieved: 0.0, extrapolated: false, lipschitz: 0.0 };
    for f in fields {
        let r = field_modulus(f, tau)?;
        best.lipschitz = best.lipschitz.max(r.lipschitz);
        if r.delta < best.delta {
            best.delta = r.delta;
            best.achieved = r.achieved;
            best.extrapolated = r.extrapolated;
        } else if r.delta == best.delta {
            best.achieved = best.achieved.max(r.achieved);
            best.extrapolated |= r.extrapolated;
        }
    }
    Ok(best)
}

/// `max |F(x + d h) - F(x)|` over nodes for one offset.
fn offset_sup(f: &ComplexField, di: isize, dj: isize) -> f64 {
    let n = f.grid().n() as isize;
    let v = f.values();
    let mut m = 0.0f64;
    for j in 0.max(-dj)..n.min(n - dj) {
        for i in 0.max(-di)..n.min(n - di) {
            let a = v[(j * n + i) as usize];
            let b = v[((j + dj) * n + i + di) as usize];
            m = m.max((a - b).norm());
        }
    }
    m
}

fn field_modulus(f: &ComplexField, tau: f64) -> Result<ModulusReport, ConstructError> {
    if let Some(k) = f.values().iter().position(|z| !z.is_finite()) {
        let (i, j) = f.grid().ij(k);
        return Err(FieldError::NonFinite { i, j, z: f.values()[k] }.into());
    }
    let h = f.grid().h();
    let n = f.grid().n() as isize;
    let lipschitz = offset_sup(f, 1, 0).max(offset_sup(f, 0, 1)) / h;
    let kmax = ((1.0 / h).floor() as isize).min(n - 1).max(1);
    // half-plane of offsets: d and -d give the same pair set
    let ring = |k: isize| -> Vec<(isize, isize)> {
        let (lo, hi) = ((k - 1) * (k - 1), k * k);
        let mut out = Vec::new();
        for dj in 0..=k {
            for di in -k..=k {
                let r2 = di * di + dj * dj;
                if (dj > 0 || di > 0) && r2 > lo && r2 <= hi {
                    out.push((di, dj));
                }
            }
        }
        out
    };
    let mut omega = 0.0f64;
    for k in 1..=kmax {
        let w = ring(k).into_iter().map(|(di, dj)| offset_sup(f, di, dj)).fold(omega, f64::max);
        if w >= tau {
            if k == 1 {
                let delta = if lipschitz > 0.0 { (tau / lipschitz).min(1.0) } else { 1.0 };
                return Ok(ModulusReport { target: tau, delta, achieved: lipschitz * delta, extrapolated: true, lipschitz });
            }
            return Ok(ModulusReport { target: tau, delta: (k - 1) as f64 * h, achieved: omega, extrapolated: false, lipschitz });
        }
        omega = w;
    }
    let delta = if kmax as f64 * h >= 1.0 - 1e-12 { 1.0 } else { kmax as f64 * h };
    Ok(ModulusReport { target: tau, delta, achieved: omega, extrapolated: false, lipschitz })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn f1_is_the_identity() {
        assert_eq!(f1(Complex64::new(0.0, 0.0)), Complex64::new(0.0, 0.0));
        assert_eq!(f1(Complex64::new(1.5, -2.0)), Complex64::new(1.5, -2.0));
    }

    #[test]
    fn f1_measures_match_node_counting() {
        let m = f1_measures(199.0 / 200.0).unwrap();
        assert!((m.small - PI / 64.0 * 0.995).abs() < 1e-15 && (m.small - 0.04884).abs() < 1e-4);
        assert!(m.small_ok && m.large_ok);
        // midpoint counting of |z| <= 1/4 and |z| >= 3/4 in S_1
        let k = 2000;
        let (mut lo, mut hi) = (0usize, 0usize);
        for i in 0..k {
            for j in 0..k {
                let z = Complex64::new(-1.0 + (2 * i + 1) as f64 / k as f64, -1.0 + (2 * j + 1) as f64 / k as f64);
                lo += (z.norm() <= 0.25) as usize;
                hi += (z.norm() >= 0.75) as usize;
            }
        }
        let total = (k * k) as f64;
        assert!((lo as f64 / total * 0.995 - m.small).abs() < 1e-4);
        assert!((hi as f64 / total * 0.995 - m.large).abs() < 1e-3);
        assert!(!f1_measures(0.5).unwrap().small_ok);
    }

    #[test]
    fn loss_series_value() {
        // slowly convergent; compare with a direct sum to 10⁷ plus its tail
        let mut s = Neumaier::default();
        for k in 2..=10_000_000u64 {
            let kf = k as f64;
            s.add(1.0 / (kf * kf.ln().powi(2)));
        }
        let direct = s.value() + 1.0 / (1e7f64 + 0.5).ln();
        assert!((loss_series() - direct).abs() < 1e-6);
        assert!((loss_series() - 2.1097).abs() < 2e-3);
    }

    #[test]
    fn chain_bound_examples() {
        let c = nonconstancy_chain(199.0 / 200.0, loss_series() / 200.0).unwrap();
        assert!(c.passed && c.bound > 0.01);
        let tight = nonconstancy_chain(199.0 / 200.0, 0.0199).unwrap();
        assert!(tight.passed);
        assert!(!nonconstancy_chain(0.9, 0.0).unwrap().passed);
    }

    fn grid(half: f64, h: f64) -> Grid {
        Grid::on_lattice(Complex64::new(0.0, 0.0), half, h).unwrap()
    }

    #[test]
    fn constant_fields_give_one() {
        let f = ComplexField::sample(grid(1.5, 1.0 / 16.0), |_| Complex64::new(2.0, -1.0)).unwrap();
        let r = modulus_delta(&[f], 2).unwrap();
        assert_eq!(r.delta, 1.0);
        assert!(!r.extrapolated);
    }

    #[test]
    fn identity_gives_the_target() {
        let h = 1.0 / 512.0;
        let f = ComplexField::sample(grid(0.5, h), |z| z).unwrap();
        let tau = 0.05;
        let r = modulus_delta_for(&[f.clone()], tau).unwrap();
        assert!(!r.extrapolated && (r.delta - tau).abs() <= h && r.achieved < tau, "{r:?}");
        let fine = modulus_delta(&[f], 2).unwrap();
        assert!(fine.extrapolated && (fine.delta - 5e-5).abs() < 1e-12, "{fine:?}");
    }

    #[test]
    fn cubic_modulus_holds_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c: Vec<Complex64> = (0..4).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let p = |z: Complex64| c[0] + z * (c[1] + z * (c[2] + z * c[3]));
        let h = 1.0 / 2048.0;
        let f = ComplexField::sample(grid(0.25, h), p).unwrap();
        let tau = 1e-2;
        let r = modulus_delta_for(&[f], tau).unwrap();
        assert!(!r.extrapolated && r.delta > 0.0);
        // off-grid pairs closer than δ: continuum modulus up to one grid step of slack
        let lip = r.lipschitz;
        let mut worst = 0.0f64;
        for _ in 0..200_000 {
            let z = Complex64::new(rng.gen_range(-0.25..0.25), rng.gen_range(-0.25..0.25));
            let w = z + Complex64::from_polar(rng.gen_range(0.0..r.delta), rng.gen_range(0.0..std::f64::consts::TAU));
            if w.re.abs() <= 0.25 && w.im.abs() <= 0.25 {
                worst = worst.max((p(z) - p(w)).norm());
            }
        }
        assert!(worst < tau + 2.0 * lip * h, "{worst} vs {tau}");
        assert!(worst > 0.5 * tau);
    }
}
