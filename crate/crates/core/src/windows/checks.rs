use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::functions::nearest_odd;
use super::system::{cell_center, WindowSystem};
use crate::fields::{local_lipschitz, submean_test, FieldError, Grid, Measure, RasterSet, SubmeanReport};

/// Strip piece `{|x - center| < 1/C} ∩ box` (or the horizontal analogue).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripRect {
    pub vertical: bool,
    pub center: f64,
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl StripRect {
    fn contains(&self, z: Complex64, tol: f64) -> bool {
        z.re >= self.x0 - tol && z.re <= self.x1 + tol && z.im >= self.y0 - tol && z.im <= self.y1 + tol
    }

    fn inside(&self, o: &StripRect) -> bool {
        self.x0 >= o.x0 && self.x1 <= o.x1 && self.y0 >= o.y0 && self.y1 <= o.y1
    }

    pub fn width(&self) -> f64 {
        if self.vertical {
            self.x1 - self.x0
        } else {
            self.y1 - self.y0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct P1Entry {
    pub index: usize,
    pub lambda: [f64; 2],
    pub d_measure: Measure,
    pub fraction: f64,
    pub fraction_bound: f64,
    pub fraction_ok: bool,
    /// Max of `‖z - λ‖∞ - 1` over `D^{+1/C}`; contained when `<= 0`.
    pub containment_excess: f64,
    pub contained: bool,
    pub rectangles: usize,
    pub max_rect_width: f64,
    /// Every node of `S_1(λ)` with `v > 0` lies in one of the rectangles.
    pub cover_verified: bool,
    pub components: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct P2Entry {
    pub index: usize,
    pub nodes: usize,
    /// Min over nodes of `2πC + πC|z|/2 - ln v(z)`.
    pub min_log_margin: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct P3Entry {
    pub index: usize,
    pub nodes: usize,
    pub min_v: f64,
    /// Min over annulus nodes of `v - (1/2 - 10 h Lip)`.
    pub min_excess: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubharmonicEntry {
    pub index: usize,
    pub report: SubmeanReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    #[serde(rename = "C")]
    pub c: f64,
    pub h: f64,
    pub points: usize,
    pub p1: Vec<P1Entry>,
    pub p2: Vec<P2Entry>,
    pub p3: Vec<P3Entry>,
    pub subharmonic: Vec<SubharmonicEntry>,
    pub passed: bool,
}

/// Strip pieces covering `S_1(λ_k) \ D_{λ_k}`, merged along lines and with
/// pieces inside other pieces dropped.
pub fn intruding_rectangles(ws: &WindowSystem, k: usize) -> Vec<StripRect> {
    let c = ws.c();
    let w = 1.0 / c;
    let pts = ws.config().points();
    let lam = pts[k];
    let (lx0, lx1, ly0, ly1) = (lam.re - 1.0, lam.re + 1.0, lam.im - 1.0, lam.im + 1.0);
    let mut raw: Vec<StripRect> = Vec::new();
    let mut push = |vertical: bool, center: f64, bx: (f64, f64), by: (f64, f64)| {
        let (x0, x1, y0, y1) = if vertical {
            ((center - w).max(bx.0), (center + w).min(bx.1), by.0, by.1)
        } else {
            (bx.0, bx.1, (center - w).max(by.0), (center + w).min(by.1))
        };
        if x1 > x0 && y1 > y0 {
            raw.push(StripRect { vertical, center, x0, x1, y0, y1 });
        }
    };
    let full = ((lx0, lx1), (ly0, ly1));
    let mut kx = nearest_odd(lx0 - 2.0);
    while kx <= lx1 + 2.0 {
        push(true, kx, full.0, full.1);
        kx += 2.0;
    }
    let mut ky = nearest_odd(ly0 - 2.0);
    while ky <= ly1 + 2.0 {
        push(false, ky, full.0, full.1);
        ky += 2.0;
    }
    for &cell in ws.a_set(k) {
        let om = cell_center(cell);
        let bx = ((om.re - 1.0).max(lx0), (om.re + 1.0).min(lx1));
        let by = ((om.im - 1.0).max(ly0), (om.im + 1.0).min(ly1));
        if bx.1 <= bx.0 || by.1 <= by.0 {
            continue;
        }
        for &m in ws.b_set(cell) {
            let mu = pts[m];
            push(true, mu.re - 1.0, bx, by);
            push(true, mu.re + 1.0, bx, by);
            push(false, mu.im - 1.0, bx, by);
            push(false, mu.im + 1.0, bx, by);
        }
    }
    // merge collinear pieces with equal cross section
    let mut merged: Vec<StripRect> = Vec::new();
    raw.sort_by(|a, b| {
        (a.vertical, a.center, a.x0, a.y0)
            .partial_cmp(&(b.vertical, b.center, b.x0, b.y0))
            .unwrap()
    });
    for r in raw {
        if let Some(last) = merged.last_mut() {
            if last.vertical == r.vertical && last.center == r.center {
                if r.vertical && last.x0 == r.x0 && last.x1 == r.x1 && r.y0 <= last.y1 {
                    last.y1 = last.y1.max(r.y1);
                    continue;
                }
                if !r.vertical && last.y0 == r.y0 && last.y1 == r.y1 && r.x0 <= last.x1 {
                    last.x1 = last.x1.max(r.x1);
                    continue;
                }
            }
        }
        merged.push(r);
    }
    let mut out: Vec<StripRect> = Vec::new();
    for (i, r) in merged.iter().enumerate() {
        let dominated = merged
            .iter()
            .enumerate()
            .any(|(j, o)| j != i && r.inside(o) && (!o.inside(r) || j < i));
        if !dominated {
            out.push(*r);
        }
    }
    out
}

fn p1_entry(ws: &WindowSystem, k: usize) -> Result<P1Entry, FieldError> {
    let win = &ws.windows()[k];
    let c = ws.c();
    let lam = win.lambda;
    let grid = win.grid;
    let dm = win.d.measure();
    let fraction = dm.value / 4.0;
    let bound = 1.0 - 80.0 / c;
    let dil = win.d.dilate(1.0 / c);
    let mut excess = f64::NEG_INFINITY;
    for idx in dil.members() {
        let z = grid.node_at(idx) - lam;
        excess = excess.max(z.re.abs().max(z.im.abs()) - 1.0);
    }
    let contained = excess <= 1e-9 * ws.h();
    let rects = intruding_rectangles(ws, k);
    let max_w = rects.iter().map(StripRect::width).fold(0.0, f64::max);
    let s1 = crate::fields::Square::new(lam, 1.0)?;
    let mut cover = true;
    let mut comp_mask = vec![false; grid.len()];
    for (idx, &v) in win.v.values().iter().enumerate() {
        let z = grid.node_at(idx);
        if !s1.contains_tol(z, 1e-9 * ws.h()) {
            continue;
        }
        let zc = Complex64::new(z.re.clamp(s1.x_range().0, s1.x_range().1), z.im.clamp(s1.y_range().0, s1.y_range().1));
        if v > 0.0 && !rects.iter().any(|r| r.contains(zc, 1e-9 * ws.h())) {
            cover = false;
        }
        comp_mask[idx] = v > 0.0;
    }
    let components = RasterSet::from_mask(grid, comp_mask)?.components().1;
    let fraction_ok = fraction + dm.error / 4.0 >= bound;
    let ok = fraction_ok && contained && rects.len() <= 20 && max_w <= 2.0 / c + 1e-12 && cover;
    Ok(P1Entry {
        index: k,
        lambda: [lam.re, lam.im],
        d_measure: dm,
        fraction,
        fraction_bound: bound,
        fraction_ok,
        containment_excess: excess,
        contained,
        rectangles: rects.len(),
        max_rect_width: max_w,
        cover_verified: cover,
        components,
        passed: ok,
    })
}

/// P1: area fraction, `D^{+1/C} ⊆ S_1(λ)` and the rectangle cover, per point.
pub fn check_p1(ws: &WindowSystem) -> Result<Vec<P1Entry>, FieldError> {
    (0..ws.windows().len()).map(|k| p1_entry(ws, k)).collect()
}

fn p2_margin(ws: &WindowSystem, grid: &Grid, values: &[f64]) -> f64 {
    let c = ws.c();
    let mut m = f64::INFINITY;
    for (idx, &v) in values.iter().enumerate() {
        if v <= 0.0 {
            continue;
        }
        let z = grid.node_at(idx);
        let bound = 2.0 * PI * c + 0.5 * PI * c * z.norm();
        m = m.min(bound - v.ln());
    }
    m
}

/// P2 at every node of every local window.
pub fn check_p2(ws: &WindowSystem) -> Vec<P2Entry> {
    ws.windows()
        .iter()
        .enumerate()
        .map(|(k, win)| {
            let m = p2_margin(ws, &win.grid, win.v.values());
            P2Entry { index: k, nodes: win.grid.len(), min_log_margin: m, passed: m >= -1e-12 * (1.0 + m.abs()) }
        })
        .collect()
}

/// P2 at every node of an arbitrary grid, evaluated in log-space.
pub fn check_p2_on(ws: &WindowSystem, grid: &Grid) -> P2Entry {
    let c = ws.c();
    let mut m = f64::INFINITY;
    for idx in 0..grid.len() {
        let z = grid.node_at(idx);
        let lv = ws.log_eval(z);
        if lv == f64::NEG_INFINITY {
            continue;
        }
        m = m.min(2.0 * PI * c + 0.5 * PI * c * z.norm() - lv);
    }
    P2Entry { index: usize::MAX, nodes: grid.len(), min_log_margin: m, passed: m >= -1e-12 * (1.0 + m.abs()) }
}

/// Raster annulus `D^{+5/3C} \ D^{+1/3C}` of a window.
pub fn p3_annulus(ws: &WindowSystem, k: usize) -> Result<RasterSet, FieldError> {
    let c = ws.c();
    let d = &ws.windows()[k].d;
    d.dilate(5.0 / (3.0 * c)).difference(&d.dilate(1.0 / (3.0 * c)))
}

/// P3: `v >= 1/2 - 10 h Lip` on the raster annulus.
pub fn check_p3(ws: &WindowSystem) -> Result<Vec<P3Entry>, FieldError> {
    let h = ws.h();
    (0..ws.windows().len())
        .map(|k| {
            let win = &ws.windows()[k];
            let ring = p3_annulus(ws, k)?;
            let n = win.grid.n();
            let mut min_v = f64::INFINITY;
            let mut min_ex = f64::INFINITY;
            let mut count = 0;
            for idx in ring.members() {
                let v = win.v.values()[idx];
                let tol = 10.0 * h * local_lipschitz(&win.v, idx % n, idx / n);
                min_v = min_v.min(v);
                min_ex = min_ex.min(v - (0.5 - tol));
                count += 1;
            }
            Ok(P3Entry { index: k, nodes: count, min_v, min_excess: min_ex, passed: count == 0 || min_ex >= 0.0 })
        })
        .collect()
}

/// Sub-mean-value test of `v` on every local window at radius `2h`.
pub fn check_subharmonic(ws: &WindowSystem) -> Result<Vec<SubharmonicEntry>, FieldError> {
    let h = ws.h();
    ws.windows()
        .iter()
        .enumerate()
        .map(|(k, win)| Ok(SubharmonicEntry { index: k, report: submean_test(&win.v, 2.0 * h, 10.0)? }))
        .collect()
}

/// All window checks.
pub fn check_all(ws: &WindowSystem) -> Result<WindowReport, FieldError> {
    let p1 = check_p1(ws)?;
    let p2 = check_p2(ws);
    let p3 = check_p3(ws)?;
    let subharmonic = check_subharmonic(ws)?;
    let passed = p1.iter().all(|e| e.passed)
        && p2.iter().all(|e| e.passed)
        && p3.iter().all(|e| e.passed)
        && subharmonic.iter().all(|e| e.report.passed());
    Ok(WindowReport { c: ws.c(), h: ws.h(), points: ws.config().len(), p1, p2, p3, subharmonic, passed })
}
