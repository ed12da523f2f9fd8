use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::projection::{log_weighted_sq_norm, weighted_projection, Polynomial, ProjectionParams};
use super::solve::{alpha_log_weights, rhs_log_weights};
use super::bump;
use crate::fields::{dbar_fd, ComplexField, FieldError, Grid, RasterSet, RealField, Square};
use crate::shglue::{
    bounding_domain, check_patch_grid, glue_subharmonic, patch_node, GlueError, ShGlueParams, SubharmonicGlueResult,
    SubharmonicPatchSet,
};
use crate::windows::Configuration;

/// Analytic patches `f_λ` sampled on `S_1`, with the constants `M` and `B`.
#[derive(Clone, Debug)]
pub struct AnalyticPatchSet {
    config: Configuration,
    patches: Vec<ComplexField>,
    m: f64,
    b: f64,
}

impl AnalyticPatchSet {
    /// Validates the holomorphy test and `max |f_λ| <= exp(2^{1-B} M)`.
    pub fn new(config: Configuration, patches: Vec<ComplexField>, m: f64, b: f64) -> Result<Self, GlueError> {
        if patches.len() != config.len() {
            return Err(GlueError::Input(format!("{} patches for {} points", patches.len(), config.len())));
        }
        if !(m > 0.0 && m.is_finite() && b.is_finite()) {
            return Err(GlueError::Input(format!("M = {m}, B = {b} must be finite with M > 0")));
        }
        let log_cap = log_patch_cap(m, b);
        for (k, p) in patches.iter().enumerate() {
            check_patch_grid(p.grid(), k)?;
            let sup = p.sup_norm(None)?;
            if sup > 0.0 && sup.ln() > log_cap + 1e-12 {
                return Err(GlueError::Input(format!("patch {k}: ln sup |f| = {} exceeds 2^(1-B) M = {log_cap:e}", sup.ln())));
            }
            let h = p.grid().h();
            let d = dbar_fd(p)?.sup_norm(None)?;
            if d > 50.0 * h * h * sup + 1e-14 {
                return Err(GlueError::Input(format!("patch {k} fails the holomorphy test: sup |∂̄f| = {d:e}")));
            }
        }
        Ok(Self { config, patches, m, b })
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn patches(&self) -> &[ComplexField] {
        &self.patches
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// `u_λ = log₊|f_λ|` with the same `M`.
    pub fn subharmonic_patches(&self) -> Result<SubharmonicPatchSet, GlueError> {
        let u: Result<Vec<RealField>, FieldError> =
            self.patches.iter().map(|p| p.map(|_, v| v.norm().ln().max(0.0))).collect();
        SubharmonicPatchSet::new(self.config.clone(), u?, self.m)
    }
}

/// `2^{1-B} M`, the log of the patch bound.
fn log_patch_cap(m: f64, b: f64) -> f64 {
    2f64.powf(1.0 - b) * m
}

/// Which quantitative steps of the weld hold at the chosen constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub c_gt_7: bool,
    pub m_gt_40_log_c: bool,
    /// `10^4 C² e^{M(2^{2-B}-1)} 4C² · 40 <= C⁴ e^{-M/2}`.
    pub rhs_chain: bool,
    /// `C^{11} e^{-M/2} < 1/2`.
    pub e2_chain: bool,
    /// `C^{11} e^{M(2^{1-B}-1/2)} <= e^{-M/4}`.
    pub e1_chain: bool,
}

pub fn hypotheses(c: f64, m: f64, b: f64) -> HypothesisReport {
    let lc = c.ln();
    HypothesisReport {
        c_gt_7: c > 7.0,
        m_gt_40_log_c: m > 40.0 * lc,
        rhs_chain: (1e4f64 * 4.0 * 40.0).ln() + 4.0 * lc + m * (2f64.powf(2.0 - b) - 1.0) <= 4.0 * lc - m / 2.0,
        e2_chain: 11.0 * lc - m / 2.0 < -LN_2,
        e1_chain: 11.0 * lc + m * (2f64.powf(1.0 - b) - 0.5) <= -m / 4.0,
    }
}

/// Cutoff `χ`: mollified indicator of `∪ D_λ^{+1/2C}`.
#[derive(Clone, Debug)]
pub struct Cutoff {
    pub chi: RealField,
    /// Measured `max |∇χ|` by central differences.
    pub gradient_bound: f64,
    /// `χ` restricted to each local window grid.
    pub pieces: Vec<RealField>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffReport {
    pub range_ok: bool,
    /// `χ = 1` on every `D_λ^{+1/4C}`.
    pub ones_ok: bool,
    /// `χ = 0` off `∪ D_λ^{+3/4C}`.
    pub zeros_ok: bool,
    pub max_gradient: f64,
    pub gradient_limit: f64,
    pub passed: bool,
}

fn offset_of(local: &Grid, domain: &Grid) -> Result<(isize, isize), GlueError> {
    local.offset_in(domain).ok_or_else(|| GlueError::Geometry("window grid is not aligned with the domain grid".into()))
}

fn to_domain(n_loc: usize, off: (isize, isize), n: usize, idx: usize) -> Option<usize> {
    let (i, j) = ((idx % n_loc) as isize + off.0, (idx / n_loc) as isize + off.1);
    let n = n as isize;
    (i >= 0 && j >= 0 && i < n && j < n).then(|| (j * n + i) as usize)
}

/// Mollifies `ψ = Σ 1_{D_λ^{+1/2C}}` with the normalized bump of radius
/// `1/(4C)`; `d_sets` live on lattice grids aligned with `domain`.
pub fn build_cutoff(d_sets: &[RasterSet], domain: &Grid, c: f64) -> Result<Cutoff, GlueError> {
    let h = domain.h();
    if h > (1.0 + 1e-9) / (32.0 * c) {
        return Err(GlueError::Resolution(format!("cutoff needs h <= 1/(32C) = {:e}, got {h:e}", 1.0 / (32.0 * c))));
    }
    let r = 1.0 / (4.0 * c) / h;
    let reach = r.ceil() as isize;
    let mut taps = Vec::new();
    for b in -reach..=reach {
        for a in -reach..=reach {
            let w = bump(Complex64::new(a as f64, b as f64) / r);
            if w > 0.0 {
                taps.push((a, b, w));
            }
        }
    }
    let den: f64 = taps.iter().map(|t| t.2).sum();
    let n = domain.n();
    let mut chi = vec![0.0; domain.len()];
    let mut pieces = Vec::with_capacity(d_sets.len());
    for (k, d) in d_sets.iter().enumerate() {
        let grid = *d.grid();
        if ((grid.h() - h) / h).abs() > 1e-9 {
            return Err(FieldError::GridMismatch.into());
        }
        let off = offset_of(&grid, domain)?;
        let nl = grid.n();
        let psi = d.dilate(1.0 / (2.0 * c));
        let din = psi.distance_sq_to_complement();
        let dout = psi.distance_sq_to_members();
        let mask = psi.mask();
        let local: Vec<f64> = (0..grid.len())
            .map(|idx| {
                if mask[idx] && din[idx] >= r * r {
                    return 1.0;
                }
                if !mask[idx] && dout[idx] >= r * r {
                    return 0.0;
                }
                let (i, j) = ((idx % nl) as isize, (idx / nl) as isize);
                let mut num = 0.0;
                for &(a, b, w) in &taps {
                    let (ii, jj) = (i + a, j + b);
                    let inside = ii >= 0 && jj >= 0 && (ii as usize) < nl && (jj as usize) < nl;
                    num += if inside && mask[jj as usize * nl + ii as usize] { w } else { 0.0 };
                }
                (num / den).clamp(0.0, 1.0)
            })
            .collect();
        for (idx, &v) in local.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let dom = to_domain(nl, off, n, idx).ok_or_else(|| GlueError::Geometry(format!("cutoff of window {k} leaves the domain")))?;
            if chi[dom] != 0.0 {
                return Err(GlueError::Geometry(format!("cutoff of window {k} overlaps another window")));
            }
            chi[dom] = v;
        }
        pieces.push(RealField::from_values(grid, local)?);
    }
    let mut grad = 0.0f64;
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let gx = (chi[j * n + i + 1] - chi[j * n + i - 1]) / (2.0 * h);
            let gy = (chi[(j + 1) * n + i] - chi[(j - 1) * n + i]) / (2.0 * h);
            grad = grad.max(gx.hypot(gy));
        }
    }
    Ok(Cutoff { chi: RealField::from_values(*domain, chi)?, gradient_bound: grad, pieces })
}

/// Checks the three cutoff properties on the local window grids.
pub fn check_cutoff(cut: &Cutoff, d_sets: &[RasterSet], c: f64) -> Result<CutoffReport, GlueError> {
    let range_ok = cut.chi.values().iter().all(|&x| (0.0..=1.0).contains(&x));
    let mut ones_ok = true;
    let mut zeros_ok = true;
    for (piece, d) in cut.pieces.iter().zip(d_sets) {
        let ones = d.dilate(1.0 / (4.0 * c));
        let outer = d.dilate(3.0 / (4.0 * c));
        for (idx, &v) in piece.values().iter().enumerate() {
            if ones.mask()[idx] && v != 1.0 {
                ones_ok = false;
            }
            if !outer.mask()[idx] && v != 0.0 {
                zeros_ok = false;
            }
        }
    }
    let limit = 100.0 * c;
    Ok(CutoffReport {
        range_ok,
        ones_ok,
        zeros_ok,
        max_gradient: cut.gradient_bound,
        gradient_limit: limit,
        passed: range_ok && ones_ok && zeros_ok && cut.gradient_bound <= limit,
    })
}

/// `g = χ Σ f_λ(· - λ) 1_{S_1(λ)}` on the cutoff's domain grid.
pub fn assemble_g(ps: &AnalyticPatchSet, cut: &Cutoff) -> Result<ComplexField, GlueError> {
    let domain = *cut.chi.grid();
    let n = domain.n();
    let mut g = vec![Complex64::new(0.0, 0.0); domain.len()];
    if cut.pieces.len() != ps.patches.len() {
        return Err(GlueError::Input("cutoff and patch set disagree on the number of windows".into()));
    }
    for (k, (piece, &lambda)) in cut.pieces.iter().zip(ps.config.points()).enumerate() {
        let lg = *piece.grid();
        let off = offset_of(&lg, &domain)?;
        let s1 = Square::new(lambda, 1.0)?;
        for (idx, &x) in piece.values().iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let z = lg.node_at(idx);
            if !s1.contains_tol(z, 1e-9 * lg.h()) {
                return Err(GlueError::Geometry(format!("cutoff of window {k} is nonzero outside S_1(λ) at {z}")));
            }
            let fv = patch_node(&ps.patches[k], z - lambda)
                .ok_or_else(|| GlueError::Geometry(format!("window {k}: {z} is not a patch node")))?;
            let dom = to_domain(lg.n(), off, n, idx).ok_or_else(|| GlueError::Geometry(format!("window {k} leaves the domain")))?;
            g[dom] = fv * x;
        }
    }
    Ok(ComplexField::from_values(domain, g)?)
}

/// `∂̄g = g₀ ∂̄χ`, using that every patch is holomorphic; supported where `χ` varies.
pub fn dbar_g(ps: &AnalyticPatchSet, cut: &Cutoff) -> Result<ComplexField, GlueError> {
    let domain = *cut.chi.grid();
    let n = domain.n();
    let mut out = vec![Complex64::new(0.0, 0.0); domain.len()];
    for (k, (piece, &lambda)) in cut.pieces.iter().zip(ps.config.points()).enumerate() {
        let lg = *piece.grid();
        let off = offset_of(&lg, &domain)?;
        let dchi = dbar_fd(&piece.map(|_, x| Complex64::new(x, 0.0))?)?;
        for (idx, &d) in dchi.values().iter().enumerate() {
            if d == Complex64::new(0.0, 0.0) {
                continue;
            }
            let z = lg.node_at(idx);
            let fv = patch_node(&ps.patches[k], z - lambda)
                .ok_or_else(|| GlueError::Geometry(format!("window {k}: cutoff varies at {z}, outside the patch")))?;
            let dom = to_domain(lg.n(), off, n, idx).ok_or_else(|| GlueError::Geometry(format!("window {k} leaves the domain")))?;
            out[dom] += fv * d;
        }
    }
    Ok(ComplexField::from_values(domain, out)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlueParams {
    /// Degree of the polynomial representative of `f`.
    pub degree: usize,
    pub max_fit_nodes: usize,
    /// Erosion `ε` in the E1 measure bound.
    pub eps: f64,
    pub enforce_hypotheses: bool,
    /// Samples per side of `S_C` for the E2 maximum.
    pub e2_samples: usize,
}

impl Default for GlueParams {
    fn default() -> Self {
        Self { degree: 40, max_fit_nodes: 150_000, eps: 0.01, enforce_hypotheses: true, e2_samples: 8192 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct E1Entry {
    pub index: usize,
    /// `ln` of the nominal threshold `e^{-M/4}`.
    pub log_nominal_threshold: f64,
    /// `max(e^{-M/4}, 10 × dbar residual)`.
    pub threshold: f64,
    /// `sup |f - f_λ(· - λ)|` over `D_λ^{-1/4C}`.
    pub sup_inner: f64,
    /// `D_λ^{-1/4C} ⊆ A_λ`.
    pub inner_contained: bool,
    /// `m(S_1(λ) \ A_λ^{-ε})` with its raster error bar.
    pub bad_area: f64,
    pub bad_area_error: f64,
    /// `160/C + 200ε`.
    pub area_bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogCheck {
    pub log_value: f64,
    pub log_bound: f64,
    pub margin: f64,
    pub passed: bool,
}

impl LogCheck {
    fn new(log_value: f64, log_bound: f64) -> Self {
        let margin = log_bound - log_value;
        Self { log_value, log_bound, margin, passed: margin >= 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlueReport {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub h: f64,
    pub hypotheses: HypothesisReport,
    pub cutoff: CutoffReport,
    pub degree: usize,
    pub fit_nodes: usize,
    pub fit_stride: usize,
    pub fit_conditioning: f64,
    /// `sup |∂̄α - g₀∂̄χ|` over interior nodes.
    pub dbar_residual: f64,
    /// `sup |∂̄f| <= residual + 50 h² sup |f|` over interior nodes.
    pub holomorphy_ok: bool,
    pub e1: Vec<E1Entry>,
    /// `ln max_{S_C} |f|` against `ln(2^{1-B} M) + πC²`.
    pub e2: LogCheck,
    /// `∫|∂̄g|² e^{-u}` against `C⁴ e^{-M/2}`.
    pub rhs_certificate: LogCheck,
    /// `∫|α|² e^{-u}/(1+|z|²)²` against `½ ∫|∂̄g|² e^{-u}`.
    pub hormander_certificate: LogCheck,
    /// E1, E2, right-hand-side certificate, cutoff and holomorphy.
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct GlueResult {
    pub f: ComplexField,
    pub alpha: ComplexField,
    pub g: ComplexField,
    pub cutoff: Cutoff,
    /// Entire representative of `f`.
    pub poly: Polynomial,
    pub dbar_residual: f64,
    pub weighted_alpha_norm: f64,
    pub rhs_weighted_norm: f64,
    /// `A_λ` on the local window grids.
    pub a_sets: Vec<RasterSet>,
    pub report: GlueReport,
}

fn interior_sup(n: usize, v: impl Iterator<Item = f64>) -> f64 {
    v.enumerate()
        .filter(|(k, _)| {
            let (i, j) = (k % n, k / n);
            i > 0 && j > 0 && i < n - 1 && j < n - 1
        })
        .fold(0.0, |m, (_, x)| m.max(x))
}

/// Welds the patches into `f = g - α` on the domain grid of `sh.u`.
///
/// `α = g - P` where `P` is the weighted projection of `g` onto polynomials,
/// so that `∂̄α = ∂̄g` and `f = P` is entire.
pub fn glue_entire(ps: &AnalyticPatchSet, sh: &SubharmonicGlueResult, params: &GlueParams) -> Result<GlueResult, GlueError> {
    let c = ps.config.c();
    let (m, b) = (ps.m, ps.b);
    let hyp = hypotheses(c, m, b);
    if params.enforce_hypotheses && !hyp.m_gt_40_log_c {
        return Err(GlueError::Hypothesis(format!("M = {m} must exceed 40 ln C = {}", 40.0 * c.ln())));
    }
    if sh.report.m != m || sh.windows.config().points() != ps.config.points() {
        return Err(GlueError::Input("subharmonic weight was built for another patch set".into()));
    }
    let grid = *sh.u.grid();
    let n = grid.n();
    let h = grid.h();
    let cutoff = build_cutoff(&sh.d_sets, &grid, c)?;
    let cutoff_report = check_cutoff(&cutoff, &sh.d_sets, c)?;
    let g = assemble_g(ps, &cutoff)?;
    let rhs = dbar_g(ps, &cutoff)?;
    let log_wa = alpha_log_weights(&sh.u);
    let proj = weighted_projection(&g, &log_wa, &ProjectionParams { degree: params.degree, max_fit_nodes: params.max_fit_nodes })?;
    let f = proj.poly.eval_on(grid)?;
    let alpha = ComplexField::from_values(grid, g.values().iter().zip(f.values()).map(|(a, b)| a - b).collect())?;
    let residual = {
        let da = dbar_fd(&alpha)?;
        interior_sup(n, da.values().iter().zip(rhs.values()).map(|(x, y)| (x - y).norm()))
    };
    let sup_f = f.sup_norm(None)?;
    let dbar_f = interior_sup(n, dbar_fd(&f)?.values().iter().map(|x| x.norm()));
    let holomorphy_ok = dbar_f <= residual + 50.0 * h * h * sup_f;
    let log_alpha = log_weighted_sq_norm(alpha.values(), &log_wa);
    let log_rhs = log_weighted_sq_norm(rhs.values(), &rhs_log_weights(&sh.u));

    let threshold = (-m / 4.0).exp().max(10.0 * residual);
    let mut e1 = Vec::new();
    let mut a_sets = Vec::new();
    for (k, win) in sh.windows.windows().iter().enumerate() {
        let lg = win.grid;
        let off = offset_of(&lg, &grid)?;
        let s1 = Square::new(win.lambda, 1.0)?;
        let mut diff = vec![f64::INFINITY; lg.len()];
        let mut in_s1 = vec![false; lg.len()];
        for idx in 0..lg.len() {
            let z = lg.node_at(idx);
            if !s1.contains_tol(z, 1e-9 * h) {
                continue;
            }
            in_s1[idx] = true;
            let dom = to_domain(lg.n(), off, n, idx).ok_or_else(|| GlueError::Geometry(format!("window {k} leaves the domain")))?;
            let fv = patch_node(&ps.patches[k], z - win.lambda)
                .ok_or_else(|| GlueError::Geometry(format!("window {k}: {z} is not a patch node")))?;
            diff[idx] = (f.values()[dom] - fv).norm();
        }
        let a = RasterSet::from_mask(lg, diff.iter().map(|&d| d < threshold).collect())?;
        let inner = win.d.erode(1.0 / (4.0 * c));
        let sup_inner = inner.members().map(|idx| diff[idx]).fold(0.0, f64::max);
        let s1set = RasterSet::from_mask(lg, in_s1)?;
        let bad = s1set.difference(&a.erode(params.eps))?.measure();
        let area_bound = 160.0 / c + 200.0 * params.eps;
        let inner_contained = inner.is_subset(&a)?;
        e1.push(E1Entry {
            index: k,
            log_nominal_threshold: -m / 4.0,
            threshold,
            sup_inner,
            inner_contained,
            bad_area: bad.value,
            bad_area_error: bad.error,
            area_bound,
            passed: inner_contained && bad.value <= area_bound,
        });
        a_sets.push(a);
    }

    let sc = Square::centered(c)?;
    let log_max_f = proj.poly.log_max_on_square(&sc, params.e2_samples).max(sup_f.ln());
    let e2 = LogCheck::new(log_max_f, (1.0 - b) * LN_2 + m.ln() + PI * c * c);
    let rhs_certificate = LogCheck::new(log_rhs, 4.0 * c.ln() - m / 2.0);
    let hormander_certificate = LogCheck::new(log_alpha, log_rhs - LN_2);
    let passed = e1.iter().all(|e| e.passed) && e2.passed && rhs_certificate.passed && cutoff_report.passed && holomorphy_ok;
    let report = GlueReport {
        c,
        m,
        b,
        h,
        hypotheses: hyp,
        cutoff: cutoff_report,
        degree: params.degree,
        fit_nodes: proj.fit_nodes,
        fit_stride: proj.stride,
        fit_conditioning: proj.conditioning,
        dbar_residual: residual,
        holomorphy_ok,
        e1,
        e2,
        rhs_certificate,
        hormander_certificate,
        passed,
    };
    Ok(GlueResult {
        f,
        alpha,
        g,
        cutoff,
        poly: proj.poly,
        dbar_residual: residual,
        weighted_alpha_norm: log_alpha.exp(),
        rhs_weighted_norm: log_rhs.exp(),
        a_sets,
        report,
    })
}

/// Runs both gluing steps with `u_λ = log₊|f_λ|`; `h` defaults to `1/(32C)`
/// and the domain to the lattice square around all windows.
pub fn weld(ps: &AnalyticPatchSet, h: Option<f64>, params: &GlueParams) -> Result<(SubharmonicGlueResult, GlueResult), GlueError> {
    let c = ps.config.c();
    let h = h.unwrap_or(1.0 / (32.0 * c));
    let sp = ps.subharmonic_patches()?;
    let domain = bounding_domain(&ps.config, 1.0 / c + 4.0 * h)?;
    let sh = glue_subharmonic(&sp, &ShGlueParams { h, domain: Some(domain), enforce_hypotheses: params.enforce_hypotheses })?;
    let gr = glue_entire(ps, &sh, params)?;
    Ok((sh, gr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::windows::WindowSystem;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bump_values() {
        assert!((bump(c(0.0, 0.0)) - (-1f64).exp()).abs() < 1e-16);
        assert_eq!(bump(c(1.0, 0.0)), 0.0);
        assert!((bump(c(0.5, 0.0)) - 0.263_597_138_115_727_7).abs() < 1e-15);
    }

    fn patch_grid(h: f64) -> Grid {
        Grid::on_lattice(c(0.0, 0.0), 1.0, h).unwrap()
    }

    #[test]
    fn cutoff_of_a_centered_window() {
        let cc = 8.0;
        let h = 1.0 / (32.0 * cc);
        let cfg = Configuration::new(vec![c(0.0, 0.0)], None, cc).unwrap();
        let ws = WindowSystem::build(&cfg, h).unwrap();
        let d: Vec<RasterSet> = ws.windows().iter().map(|w| w.d.clone()).collect();
        let dom = Grid::on_lattice(c(0.0, 0.0), 1.25, h).unwrap();
        let cut = build_cutoff(&d, &dom, cc).unwrap();
        let rep = check_cutoff(&cut, &d, cc).unwrap();
        assert!(rep.passed, "{rep:?}");
        let (i, j) = dom.nearest(c(0.0, 0.0)).unwrap();
        assert_eq!(cut.chi.at(i, j), 1.0);
        assert!(cut.gradient_bound <= 100.0 * cc);
    }

    #[test]
    fn coarse_cutoff_is_rejected() {
        let dom = Grid::on_lattice(c(0.0, 0.0), 1.0, 1.0 / 64.0).unwrap();
        assert!(matches!(build_cutoff(&[], &dom, 8.0), Err(GlueError::Resolution(_))));
    }

    #[test]
    fn cutoff_vanishes_between_close_windows() {
        let cc = 8.0;
        let h = 1.0 / (32.0 * cc);
        let cfg = Configuration::new(vec![c(0.0, 0.0), c(2.5, 0.0)], None, cc).unwrap();
        let ws = WindowSystem::build(&cfg, h).unwrap();
        let d: Vec<RasterSet> = ws.windows().iter().map(|w| w.d.clone()).collect();
        let dom = Grid::on_lattice(c(1.25, 0.0), 2.5, h).unwrap();
        let cut = build_cutoff(&d, &dom, cc).unwrap();
        let (i, j) = dom.nearest(c(1.25, 0.0)).unwrap();
        assert_eq!(cut.chi.at(i, j), 0.0);
        assert!(check_cutoff(&cut, &d, cc).unwrap().passed);
    }

    #[test]
    fn g_of_constant_patches() {
        let cc = 8.0;
        let h = 1.0 / (32.0 * cc);
        let cfg = Configuration::new(vec![c(0.0, 0.0), c(2.5, 0.0)], None, cc).unwrap();
        let one = ComplexField::sample(patch_grid(h), |_| c(1.0, 0.0)).unwrap();
        let sq = ComplexField::sample(patch_grid(h), |z| z * z).unwrap();
        let ps = AnalyticPatchSet::new(cfg.clone(), vec![one, sq.clone()], 100.0, 4.0).unwrap();
        let ws = WindowSystem::build(&cfg, h).unwrap();
        let d: Vec<RasterSet> = ws.windows().iter().map(|w| w.d.clone()).collect();
        let dom = Grid::on_lattice(c(1.25, 0.0), 2.5, h).unwrap();
        let cut = build_cutoff(&d, &dom, cc).unwrap();
        let g = assemble_g(&ps, &cut).unwrap();
        let lam = c(2.5, 0.0);
        let inner1 = d[1].dilate(1.0 / (4.0 * cc));
        for k in 0..dom.len() {
            let z = dom.node_at(k);
            if z.re < 1.25 {
                assert_eq!(g.values()[k], c(cut.chi.values()[k], 0.0));
            }
        }
        for idx in inner1.members() {
            let z = d[1].grid().node_at(idx);
            let (i, j) = dom.nearest(z).unwrap();
            assert_eq!(g.at(i, j), (z - lam) * (z - lam));
        }
    }

    #[test]
    fn zero_patch_welds_to_zero() {
        let cc = 8.0;
        let h = 1.0 / (32.0 * cc);
        let cfg = Configuration::new(vec![c(0.0, 0.0)], None, cc).unwrap();
        let ps = AnalyticPatchSet::new(cfg, vec![ComplexField::zeros(patch_grid(h))], 100.0, 4.0).unwrap();
        let (_, gr) = weld(&ps, None, &GlueParams { degree: 8, ..GlueParams::default() }).unwrap();
        assert!(gr.f.values().iter().all(|v| v.norm() == 0.0));
        assert!(gr.a_sets[0].count() > 0);
        assert!(gr.report.e1[0].passed && gr.report.e1[0].sup_inner == 0.0);
        assert!(gr.report.e2.passed);
    }

    #[test]
    fn small_m_is_a_hypothesis_error() {
        let cc = 8.0;
        let h = 1.0 / (32.0 * cc);
        let cfg = Configuration::new(vec![c(0.0, 0.0)], None, cc).unwrap();
        let ps = AnalyticPatchSet::new(cfg, vec![ComplexField::zeros(patch_grid(h))], 50.0, 4.0).unwrap();
        assert!(matches!(weld(&ps, None, &GlueParams::default()), Err(GlueError::Hypothesis(_))));
    }

    #[test]
    fn oversized_or_nonholomorphic_patches_are_rejected() {
        let h = 1.0 / 256.0;
        let cfg = Configuration::new(vec![c(0.0, 0.0)], None, 8.0).unwrap();
        let big = ComplexField::sample(patch_grid(h), |_| c(10.0, 0.0)).unwrap();
        assert!(matches!(AnalyticPatchSet::new(cfg.clone(), vec![big], 100.0, 10.0), Err(GlueError::Input(_))));
        let conj = ComplexField::sample(patch_grid(h), |z| z.conj()).unwrap();
        assert!(matches!(AnalyticPatchSet::new(cfg, vec![conj], 100.0, 4.0), Err(GlueError::Input(_))));
    }

    #[test]
    fn e1_sup_matches_a_direct_evaluation() {
        let cc = 8.0;
        let h = 1.0 / (32.0 * cc);
        let cfg = Configuration::new(vec![c(0.0, 0.0)], None, cc).unwrap();
        let p = |z: Complex64| c(0.5, 0.1) + z * c(0.2, -0.3) + z * z * z * c(0.0, 0.25);
        let patch = ComplexField::sample(patch_grid(h), p).unwrap();
        let ps = AnalyticPatchSet::new(cfg, vec![patch], 100.0, 4.0).unwrap();
        let (sh, gr) = weld(&ps, None, &GlueParams { degree: 6, ..GlueParams::default() }).unwrap();
        let inner = sh.d_sets[0].erode(1.0 / (4.0 * cc));
        let direct = inner
            .members()
            .map(|k| (gr.poly.eval(inner.grid().node_at(k)) - p(inner.grid().node_at(k))).norm())
            .fold(0.0, f64::max);
        let e1 = &gr.report.e1[0];
        assert!((e1.sup_inner - direct).abs() < 1e-12 * direct.max(1.0), "{} vs {direct}", e1.sup_inner);
        assert_eq!(e1.inner_contained, direct < e1.threshold);
        assert!(gr.report.holomorphy_ok && gr.report.e2.passed);
    }

    #[test]
    fn dbar_g_lives_on_the_transition_band() {
        let cc = 8.0;
        let h = 1.0 / (32.0 * cc);
        let cfg = Configuration::new(vec![c(0.0, 0.0), c(2.5, 0.0)], None, cc).unwrap();
        let patch = ComplexField::sample(patch_grid(h), |z| z + c(1.0, 0.0)).unwrap();
        let ps = AnalyticPatchSet::new(cfg.clone(), vec![patch.clone(), patch], 100.0, 4.0).unwrap();
        let ws = WindowSystem::build(&cfg, h).unwrap();
        let d: Vec<RasterSet> = ws.windows().iter().map(|w| w.d.clone()).collect();
        let dom = Grid::on_lattice(c(1.25, 0.0), 2.5, h).unwrap();
        let cut = build_cutoff(&d, &dom, cc).unwrap();
        let rhs = dbar_g(&ps, &cut).unwrap();
        let mut band = vec![false; dom.len()];
        for (k, dk) in d.iter().enumerate() {
            let outer = dk.dilate(3.0 / (4.0 * cc) + h);
            let inner = dk.dilate(1.0 / (4.0 * cc) - h);
            let off = ws.windows()[k].grid.offset_in(&dom).unwrap();
            for idx in outer.difference(&inner).unwrap().members() {
                if let Some(t) = to_domain(dk.grid().n(), off, dom.n(), idx) {
                    band[t] = true;
                }
            }
        }
        let mut nonzero = 0;
        for (t, v) in rhs.values().iter().enumerate() {
            if v.norm() > 0.0 {
                nonzero += 1;
                assert!(band[t], "∂̄g off the band at {}", dom.node_at(t));
            }
        }
        assert!(nonzero > 0);
    }
}
