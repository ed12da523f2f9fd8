use std::collections::HashMap;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::WindowError;
use crate::fields::snap;

/// Finite point set with pairwise `∞`-separation greater than 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    points: Vec<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<usize>>,
    #[serde(rename = "C")]
    c: f64,
}

fn cheb(a: Complex64, b: Complex64) -> f64 {
    (a.re - b.re).abs().max((a.im - b.im).abs())
}

impl Configuration {
    pub fn new(points: Vec<Complex64>, labels: Option<Vec<usize>>, c: f64) -> Result<Self, WindowError> {
        if !(c >= 1.0) || !c.is_finite() {
            return Err(WindowError::InvalidC { c });
        }
        if let Some(l) = &labels {
            if l.len() != points.len() {
                return Err(WindowError::LabelMismatch { points: points.len(), labels: l.len() });
            }
        }
        if let Some(k) = points.iter().position(|p| !(p.re.is_finite() && p.im.is_finite())) {
            return Err(WindowError::NonFinitePoint { index: k });
        }
        if let Some((i, j)) = separation_violation(&points) {
            return Err(WindowError::Separation {
                i,
                j,
                a: points[i],
                b: points[j],
                distance: cheb(points[i], points[j]),
            });
        }
        Ok(Self { points, labels, c })
    }

    /// Revalidates a deserialized configuration.
    pub fn validated(self) -> Result<Self, WindowError> {
        Self::new(self.points, self.labels, self.c)
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same points with another `C`.
    pub fn with_c(&self, c: f64) -> Result<Self, WindowError> {
        Self::new(self.points.clone(), self.labels.clone(), c)
    }

    /// Configuration without point `k`.
    pub fn without(&self, k: usize) -> Self {
        let mut p = self.points.clone();
        p.remove(k);
        let labels = self.labels.as_ref().map(|l| {
            let mut l = l.clone();
            l.remove(k);
            l
        });
        Self { points: p, labels, c: self.c }
    }

    /// Points snapped to the lattice `h Z^2`; fails if snapping breaks separation.
    pub fn snapped(&self, h: f64) -> Result<Self, WindowError> {
        let p = self.points.iter().map(|&z| snap(z, h)).collect();
        Self::new(p, self.labels.clone(), self.c)
    }
}

/// First pair closer than or at `∞`-distance 2, found by bucketing.
fn separation_violation(points: &[Complex64]) -> Option<(usize, usize)> {
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let key = |z: Complex64| ((z.re / 2.0).floor() as i64, (z.im / 2.0).floor() as i64);
    for (k, &z) in points.iter().enumerate() {
        let (bx, by) = key(z);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = buckets.get(&(bx + dx, by + dy)) {
                    for &m in list {
                        if cheb(points[m], z) <= 2.0 {
                            return Some((m, k));
                        }
                    }
                }
            }
        }
        buckets.entry((bx, by)).or_default().push(k);
    }
    None
}

/// Random configuration in `S_extent` on the lattice `h Z^2`.
///
/// Draws uniform candidates and rejects those within `∞`-distance `min_sep`
/// of an accepted point, stopping at `max_points` or after `max_points * 200`
/// draws; dense requests may therefore return fewer points.
pub fn random_configuration<R: Rng>(
    rng: &mut R,
    max_points: usize,
    extent: f64,
    c: f64,
    h: f64,
    min_sep: f64,
) -> Result<Configuration, WindowError> {
    let min_sep = min_sep.max(2.0 + 2.0 * h);
    let mut pts: Vec<Complex64> = Vec::new();
    let mut tries = 0;
    while pts.len() < max_points && tries < max_points * 200 {
        tries += 1;
        let z = snap(Complex64::new(rng.gen_range(-extent..=extent), rng.gen_range(-extent..=extent)), h);
        if pts.iter().all(|&p| cheb(p, z) > min_sep) {
            pts.push(z);
        }
    }
    Configuration::new(pts, None, c)
}
