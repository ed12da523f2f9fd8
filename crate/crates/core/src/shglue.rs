//! Subharmonic gluing: combine nonnegative subharmonic patches `u_λ` sitting
//! in the windows `D_λ` into one subharmonic `u` with
//! `u = max(2M v, u_λ(· - λ))` on `D_λ^{+1/3C}` and `u = 2M v` elsewhere.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{local_lipschitz, on_lattice, submean_test, FieldError, Grid, RasterSet, RealField, Square, SubmeanReport};
use crate::windows::{Configuration, WindowError, WindowSystem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlueError {
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("resolution: {0}")]
    Resolution(String),
    #[error("solver did not converge: {message}; residual history {history:?}")]
    Solver { message: String, history: Vec<f64> },
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Nonnegative subharmonic patches on `S_1`, one per configuration point.
#[derive(Clone, Debug)]
pub struct SubharmonicPatchSet {
    config: Configuration,
    patches: Vec<RealField>,
    m: f64,
}

impl SubharmonicPatchSet {
    /// Validates sign, the bound `M` and the sub-mean-value test of every patch.
    pub fn new(config: Configuration, patches: Vec<RealField>, m: f64) -> Result<Self, GlueError> {
        if patches.len() != config.len() {
            return Err(GlueError::Input(format!("{} patches for {} points", patches.len(), config.len())));
        }
        if !(m > 0.0) || !m.is_finite() {
            return Err(GlueError::Input(format!("M must be positive, got {m}")));
        }
        for (k, p) in patches.iter().enumerate() {
            check_patch_grid(p.grid(), k)?;
            if let Some(v) = p.values().iter().find(|&&v| v < 0.0) {
                return Err(GlueError::Input(format!("patch {k} takes the negative value {v}")));
            }
            let sup = p.sup_norm(None)?;
            if sup > m * (1.0 + 1e-12) {
                return Err(GlueError::Input(format!("patch {k} has sup {sup} > M = {m}")));
            }
            // radius 4h: at 2h a node whose circle leaves a plateau always sees the jump in its slope estimate
            let rep = submean_test(p, 4.0 * p.grid().h(), 10.0)?;
            if !rep.passed() {
                return Err(GlueError::Input(format!(
                    "patch {k} fails the sub-mean-value test ({} nodes, worst excess {})",
                    rep.failures, rep.worst_excess
                )));
            }
        }
        Ok(Self { config, patches, m })
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn patches(&self) -> &[RealField] {
        &self.patches
    }

    pub fn m(&self) -> f64 {
        self.m
    }
}

pub(crate) fn check_patch_grid(g: &Grid, k: usize) -> Result<(), GlueError> {
    let sq = g.square();
    if sq.center.norm() > 1e-9 || sq.half_edge < 1.0 - 1e-9 {
        return Err(GlueError::Input(format!("patch {k} must be sampled on a grid centered at 0 covering S_1")));
    }
    if !on_lattice(g.node(0, 0), g.h()) {
        return Err(GlueError::Input(format!("patch {k} grid is not lattice aligned")));
    }
    Ok(())
}

/// Patch value at the local offset `w = z - λ`, which must be a patch node.
pub(crate) fn patch_node<T: crate::fields::FieldValue>(p: &crate::fields::Field<T>, w: Complex64) -> Option<T> {
    let (i, j) = p.grid().nearest(w)?;
    if (p.grid().node(i, j) - w).norm() > 1e-6 * p.grid().h() {
        return None;
    }
    Some(p.at(i, j))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShGlueParams {
    /// Grid spacing; patches and the domain share the lattice `h Z^2`.
    pub h: f64,
    /// Domain of the sampled `u`; defaults to `S_C`.
    pub domain: Option<Square>,
    /// When false, `C <= 7` is reported instead of rejected.
    #[serde(default = "yes")]
    pub enforce_hypotheses: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sh1Entry {
    pub index: usize,
    pub nodes: usize,
    pub mismatches: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sh2Entry {
    pub log_max_u: f64,
    pub log_bound: f64,
    pub margin: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sh3Entry {
    pub index: usize,
    pub nodes: usize,
    pub min_u: f64,
    /// Min over the ring of `u - (M - 2M·10 h Lip(v))`.
    pub min_excess: f64,
    /// `2M v >= M - tol >= u_λ - tol` node-wise on the ring.
    pub seam_ok: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShReport {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub hypothesis_c_gt_7: bool,
    pub sh1: Vec<Sh1Entry>,
    pub sh2: Sh2Entry,
    pub sh3: Vec<Sh3Entry>,
    pub nonnegative: bool,
    pub subharmonic: SubmeanReport,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct SubharmonicGlueResult {
    pub u: RealField,
    pub windows: WindowSystem,
    /// `D_λ` per point, on the local window grids.
    pub d_sets: Vec<RasterSet>,
    pub report: ShReport,
}

/// Lattice domain grid covering `sq`.
pub fn domain_grid(sq: &Square, h: f64) -> Result<Grid, FieldError> {
    Grid::on_lattice(sq.center, sq.half_edge, h)
}

/// Smallest lattice square centered near the configuration's bounding box
/// that contains every `S_{1 + margin}(λ)`.
pub fn bounding_domain(config: &Configuration, margin: f64) -> Result<Square, FieldError> {
    let pts = config.points();
    if pts.is_empty() {
        return Square::centered(1.0 + margin);
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p.re);
        x1 = x1.max(p.re);
        y0 = y0.min(p.im);
        y1 = y1.max(p.im);
    }
    let center = Complex64::new(0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let half = 0.5 * (x1 - x0).max(y1 - y0) + 1.0 + margin;
    Square::new(center, half)
}

/// Max of `ln(2M v)` over the boundary of `S_C` sampled at spacing `h`.
fn log_max_on_boundary(ws: &WindowSystem, c: f64, m: f64, h: f64) -> f64 {
    let steps = (2.0 * c / h).ceil() as usize;
    let mut best = f64::NEG_INFINITY;
    for s in 0..=steps {
        let t = -c + 2.0 * c * s as f64 / steps as f64;
        for z in [Complex64::new(t, -c), Complex64::new(t, c), Complex64::new(-c, t), Complex64::new(c, t)] {
            best = best.max(ws.log_eval(z));
        }
    }
    (2.0 * m).ln() + best
}

/// Glues the patches; `u` is sampled on the domain grid.
pub fn glue_subharmonic(ps: &SubharmonicPatchSet, params: &ShGlueParams) -> Result<SubharmonicGlueResult, GlueError> {
    let c = ps.config.c();
    let m = ps.m;
    let h = params.h;
    let hyp = c > 7.0;
    if !hyp && params.enforce_hypotheses {
        return Err(GlueError::Hypothesis(format!("C = {c} must exceed 7")));
    }
    for (k, p) in ps.patches.iter().enumerate() {
        if ((p.grid().h() - h) / h).abs() > 1e-9 {
            return Err(GlueError::Input(format!("patch {k} spacing {} differs from h = {h}", p.grid().h())));
        }
    }
    let ws = WindowSystem::build(&ps.config, h)?;
    let domain = match params.domain {
        Some(d) => d,
        None => Square::centered(c)?,
    };
    let grid = domain_grid(&domain, h)?;
    let two_m = 2.0 * m;
    let mut u: Vec<f64> = ws.sample(&grid)?.into_values();
    u.iter_mut().for_each(|x| *x *= two_m);

    let mut d_sets = Vec::new();
    let mut sh1 = Vec::new();
    let mut sh3 = Vec::new();
    for (k, win) in ws.windows().iter().enumerate() {
        let (di, dj) = win
            .grid
            .offset_in(&grid)
            .ok_or_else(|| GlueError::Geometry(format!("window {k} is not aligned with the domain grid")))?;
        let n_loc = win.grid.n();
        let to_dom = |idx: usize| -> Option<usize> {
            let (i, j) = ((idx % n_loc) as isize + di, (idx / n_loc) as isize + dj);
            let n = grid.n() as isize;
            (i >= 0 && j >= 0 && i < n && j < n).then(|| (j * n + i) as usize)
        };
        let inner = win.d.dilate(1.0 / (3.0 * c));
        let patch = &ps.patches[k];
        for idx in inner.members() {
            let dom = to_dom(idx).ok_or_else(|| GlueError::Geometry(format!("window {k} leaves the domain")))?;
            let w = win.grid.node_at(idx) - win.lambda;
            let pv = patch_node(patch, w)
                .ok_or_else(|| GlueError::Geometry(format!("window {k}: node offset {w} is not a patch node")))?;
            u[dom] = u[dom].max(pv);
        }
        // SH1 node-exact equality on D_λ
        let mut nodes = 0;
        let mut bad = 0;
        for idx in win.d.members() {
            nodes += 1;
            let w = win.grid.node_at(idx) - win.lambda;
            let ok = match (to_dom(idx), patch_node(patch, w)) {
                (Some(dom), Some(pv)) => u[dom] == pv,
                _ => false,
            };
            if !ok {
                bad += 1;
            }
        }
        sh1.push(Sh1Entry { index: k, nodes, mismatches: bad, passed: bad == 0 });
        // SH3 on the ring
        let ring = win.d.dilate(5.0 / (3.0 * c)).difference(&inner)?;
        let patch_sup = patch.sup_norm(None)?;
        let mut min_u = f64::INFINITY;
        let mut min_ex = f64::INFINITY;
        let mut seam = true;
        let mut cnt = 0;
        for idx in ring.members() {
            let dom = to_dom(idx).ok_or_else(|| GlueError::Geometry(format!("window {k} ring leaves the domain")))?;
            let tol = two_m * 10.0 * h * local_lipschitz(&win.v, idx % n_loc, idx / n_loc);
            min_u = min_u.min(u[dom]);
            min_ex = min_ex.min(u[dom] - (m - tol));
            if two_m * win.v.values()[idx] < m.min(patch_sup) - tol {
                seam = false;
            }
            cnt += 1;
        }
        sh3.push(Sh3Entry {
            index: k,
            nodes: cnt,
            min_u,
            min_excess: min_ex,
            seam_ok: seam,
            passed: cnt == 0 || (min_ex >= 0.0 && seam),
        });
        d_sets.push(win.d.clone());
    }
    let u = RealField::from_values(grid, u)?;

    let log_dom = u.values().iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b.ln()));
    let log_max = log_dom.max(log_max_on_boundary(&ws, c, m, h.max(c / 4096.0)));
    let log_bound = LN_2 + m.ln() + PI * c * c;
    let sh2 = Sh2Entry { log_max_u: log_max, log_bound, margin: log_bound - log_max, passed: log_bound - log_max >= 0.0 };
    let nonneg = u.values().iter().all(|&x| x >= 0.0);
    let subharmonic = submean_test(&u, 2.0 * h, 20.0)?;
    let passed = sh1.iter().all(|e| e.passed) && sh2.passed && sh3.iter().all(|e| e.passed) && nonneg && subharmonic.passed();
    let report = ShReport { c, m, hypothesis_c_gt_7: hyp, sh1, sh2, sh3, nonnegative: nonneg, subharmonic, passed };
    Ok(SubharmonicGlueResult { u, windows: ws, d_sets, report })
}
