use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{check_properties, modulus_delta, ConstructError, ModulusReport, PropertyReport};
use crate::eglue::{weld, AnalyticPatchSet, GlueParams, GlueReport, Polynomial};
use crate::fields::{ComplexField, Grid, Square};
use crate::tower::{a_sequence, generate_geometry, nested_refinement, NestedTowers, RefinementReport, TowerModel, TowerParams};
use crate::windows::Configuration;

/// `F_n^j` as a function of the unscaled variable `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntireFn {
    Identity,
    /// `u ↦ poly(u / scale)`.
    Poly { poly: Polynomial, scale: f64 },
}

impl EntireFn {
    pub fn eval(&self, u: Complex64) -> Complex64 {
        match self {
            Self::Identity => u,
            Self::Poly { poly, scale } => poly.eval(u / *scale),
        }
    }

    /// `ln max_{sq} |F|` with `per_side` boundary samples per edge.
    pub fn log_max_on_square(&self, sq: &Square, per_side: usize) -> f64 {
        match self {
            Self::Identity => sq.corners().iter().map(|z| z.norm().ln()).fold(f64::NEG_INFINITY, f64::max),
            Self::Poly { poly, scale } => match Square::new(sq.center / *scale, sq.half_edge / *scale) {
                Ok(s) => poly.log_max_on_square(&s, per_side),
                Err(_) => f64::NAN,
            },
        }
    }
}

/// One window `λ ∈ Λ_n^j` of a welded class and its good set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodWindow {
    pub lambda: Complex64,
    pub label: usize,
    /// `m(A_λ)`.
    pub area: f64,
    /// `m(A_λ^{-r})` with the erosion used for `G_n`.
    pub eroded_area: f64,
    /// `m(A_λ^{-(1+a_{n-2})/a_{n-1}})`.
    pub eroded_area_nominal: f64,
    /// Largest `|z - λ|_∞` over `A_λ^{-r}`, absent when it is empty.
    pub max_cheb: Option<f64>,
    /// `sup |F_n^j - f_λ(· - λ)|` over `D_λ^{-1/4C}`.
    pub sup_inner: f64,
    /// The same difference over `A_λ^{-δ_n/a_{n-1}}`.
    pub sup_on_good: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FClass {
    pub f: EntireFn,
    /// `μ(S_{a_n} B_n^j)`.
    pub mass: f64,
    pub fibers: usize,
    /// Weld parameter `M`, absent on level 1.
    #[serde(rename = "M")]
    pub m: Option<f64>,
    /// `max_λ ln sup_{S_1} |f_λ|`.
    pub patch_log_sup: Option<f64>,
    pub glue: Option<GlueReport>,
    pub windows: Vec<GoodWindow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FLevel {
    pub n: usize,
    pub a: f64,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub modulus: Option<ModulusReport>,
    /// Scaled erosion `(a_{n-2} + δ_n)/a_{n-1}` defining `G_n`.
    pub erosion: Option<f64>,
    /// Scaled erosion `(1 + a_{n-2})/a_{n-1}`.
    pub nominal_erosion: Option<f64>,
    pub partition_cells: usize,
    pub max_cell_distance: f64,
    /// `μ(S_{a_n} B_n)` of the final tower.
    pub mass: f64,
    pub classes: Vec<FClass>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FSequence {
    #[serde(rename = "B")]
    pub b: f64,
    pub a: Vec<f64>,
    pub levels: Vec<FLevel>,
}

impl FSequence {
    /// `F_n(T_z x)` for `x` the representative of class `j`.
    pub fn eval(&self, n: usize, j: usize, u: Complex64) -> Option<Complex64> {
        self.levels.get(n.checked_sub(1)?)?.classes.get(j).map(|c| c.f.eval(u))
    }
}

/// `ln M_B(m) = B m + π Σ_{j=2}^{m-1} (a_j/a_{j-1})²` for an explicit edge sequence.
pub fn desk_log_mb(a: &[f64], b: f64, m: usize) -> f64 {
    let s: f64 = (2..m).filter(|&j| j <= a.len()).map(|j| (a[j - 1] / a[j - 2]).powi(2)).sum();
    b * m as f64 + PI * s
}

/// Nested lattice layout for small `C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeskLayout {
    pub a: Vec<f64>,
    pub side: f64,
    pub per_side: Vec<usize>,
    pub offset_quantum: Vec<f64>,
}

impl Default for DeskLayout {
    fn default() -> Self {
        Self { a: vec![1.0, 8.0, 64.0], side: 128.5, per_side: vec![64, 8, 1], offset_quantum: vec![1.0 / 256.0, 1.0 / 32.0, 1.0 / 32.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "B")]
    pub b: f64,
    /// Coverage defect of every base tower.
    pub eps: f64,
    pub levels: usize,
    /// Weld grid spacing.
    pub h: f64,
    /// Samples per side of each square in the property checks.
    pub grid_n: usize,
    /// Spacing of the samples of `F_{n-1}` used for `δ_n`.
    pub modulus_h: f64,
    /// Lower bound for the weld parameter `M`.
    pub m_floor: f64,
    pub seed: u64,
    pub glue: GlueParams,
    /// Polynomial degree of the weld at levels `2, 3, ..`; `glue.degree` past the end.
    pub degrees: Vec<usize>,
    /// Replaces `a_n = D n ln²n a_{n-1}` and the derived lattice layout.
    pub desk: Option<DeskLayout>,
    pub max_weld_nodes: usize,
    pub max_fibers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            d: 100.0,
            b: 10.0,
            eps: 0.01,
            levels: 3,
            h: 1.0 / 256.0,
            grid_n: 65,
            modulus_h: 1.0 / 64.0,
            m_floor: 400.0,
            seed: 21,
            glue: GlueParams::default(),
            degrees: vec![8, 40],
            desk: Some(DeskLayout::default()),
            max_weld_nodes: 25_000_000,
            max_fibers: 100_000,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConstructError> {
        let bad = |m: String| Err(ConstructError::Input(m));
        if !(self.d > 0.0) || !self.b.is_finite() || self.b < 1.0 {
            return bad(format!("need D > 0 and B >= 1, got D = {}, B = {}", self.d, self.b));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("eps must lie in (0, 1), got {}", self.eps));
        }
        if self.levels < 1 {
            return bad("levels must be at least 1".into());
        }
        if !(self.h > 0.0 && self.h <= 0.125) || !(self.modulus_h > 0.0 && self.modulus_h <= 0.5) {
            return bad(format!("spacings out of range: h = {}, modulus_h = {}", self.h, self.modulus_h));
        }
        if self.grid_n < 2 {
            return bad(format!("grid_n must be at least 2, got {}", self.grid_n));
        }
        if !(self.m_floor > 0.0) {
            return bad(format!("m_floor must be positive, got {}", self.m_floor));
        }
        if let Some(d) = &self.desk {
            if d.a.len() < self.levels || d.per_side.len() != d.a.len() || d.offset_quantum.len() != d.a.len() {
                return bad(format!("desk layout has {} edges for {} levels", d.a.len(), self.levels));
            }
        }
        Ok(())
    }

    fn edges(&self) -> Result<Vec<f64>, ConstructError> {
        match &self.desk {
            Some(d) => Ok(d.a[..self.levels].to_vec()),
            None => Ok(a_sequence(self.d, self.levels)?.a),
        }
    }

    pub fn tower_params(&self) -> Result<TowerParams, ConstructError> {
        let a = self.edges()?;
        let mut p = TowerParams::new(a, vec![self.eps; self.levels], self.seed);
        if let Some(d) = &self.desk {
            p.side = Some(d.side);
            p.per_side = Some(d.per_side[..self.levels].to_vec());
            p.offset_quantum = Some(d.offset_quantum[..self.levels].to_vec());
        }
        Ok(p)
    }
}

/// Level 1: `F_1 = z` on the single class of final base points.
pub fn level_one(model: &TowerModel) -> FLevel {
    let lv = &model.levels[0];
    let classes = lv
        .classes
        .iter()
        .map(|c| FClass { f: EntireFn::Identity, mass: c.mass, fibers: c.fibers.len(), m: None, patch_log_sup: None, glue: None, windows: vec![] })
        .collect();
    FLevel {
        n: 1,
        a: lv.a,
        c: None,
        modulus: None,
        erosion: None,
        nominal_erosion: None,
        partition_cells: lv.classes.len(),
        max_cell_distance: 0.0,
        mass: lv.mass(),
        classes,
    }
}

fn max_cheb(set: &crate::fields::RasterSet, lambda: Complex64) -> Option<f64> {
    let g = set.grid();
    set.members().map(|k| {
        let d = g.node_at(k) - lambda;
        d.re.abs().max(d.im.abs())
    }).fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))))
}

/// Welds level `n = seq.levels.len() + 1`: partitions the level-`n` fibers
/// with `δ_n`, then welds `f_λ(z) = F_{n-1}^ℓ(a_{n-1} z)` per class.
pub fn build_next(
    model: &mut TowerModel,
    towers: &NestedTowers,
    seq: &mut FSequence,
    cfg: &PipelineConfig,
) -> Result<(), ConstructError> {
    let n = seq.levels.len() + 1;
    if n < 2 || model.levels.len() != n - 1 {
        return Err(ConstructError::Input(format!("model has {} levels, sequence {}", model.levels.len(), seq.levels.len())));
    }
    let prev = &seq.levels[n - 2];
    let a_prev = prev.a;
    let a_prev2 = if n >= 3 { seq.levels[n - 3].a } else { 0.0 };

    let sample_grid = Grid::on_lattice(Complex64::new(0.0, 0.0), a_prev + 1.0, cfg.modulus_h)?;
    let fields = prev
        .classes
        .iter()
        .map(|c| ComplexField::sample(sample_grid, |u| c.f.eval(u)))
        .collect::<Result<Vec<_>, _>>()?;
    let modulus = modulus_delta(&fields, n)?;
    drop(fields);
    let delta = modulus.delta;
    let partition = model.add_level(towers, delta, None)?;
    let level = &model.levels[n - 1];
    let c = level.a / a_prev;
    let r = (a_prev2 + delta) / a_prev;
    let r_nominal = (1.0 + a_prev2) / a_prev;
    let patch_grid = Grid::on_lattice(Complex64::new(0.0, 0.0), 1.0, cfg.h)?;

    let mut classes = Vec::with_capacity(level.classes.len());
    for (j, class) in level.classes.iter().enumerate() {
        let wrap = |e: crate::shglue::GlueError| ConstructError::Glue { level: n, class: j, source: e };
        let points: Vec<Complex64> = class.configuration.iter().map(|&(z, _)| z).collect();
        let labels: Vec<usize> = class.configuration.iter().map(|&(_, l)| l).collect();
        let extent = points.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max) + 1.0 + 1.0 / c;
        let nodes = (2.0 * extent / cfg.h).powi(2);
        if nodes > cfg.max_weld_nodes as f64 {
            return Err(ConstructError::Input(format!(
                "level {n} class {j}: weld grid of about {nodes:.3e} nodes exceeds {}",
                cfg.max_weld_nodes
            )));
        }
        let patches = labels
            .iter()
            .map(|&l| ComplexField::sample(patch_grid, |z| prev.classes[l].f.eval(z * a_prev)))
            .collect::<Result<Vec<_>, _>>()?;
        let log_sup = patches
            .iter()
            .flat_map(|p| p.values().iter().map(|v| v.norm()))
            .fold(0.0, f64::max)
            .ln();
        let m = cfg.m_floor.max(2f64.powf(cfg.b - 1.0) * log_sup * (1.0 + 1e-9));
        let config = Configuration::new(points.clone(), Some(labels.clone()), c)
            .map_err(|e| ConstructError::Input(format!("level {n} class {j}: {e}")))?;
        let ps = AnalyticPatchSet::new(config, patches, m, cfg.b).map_err(wrap)?;
        let glue = GlueParams { degree: cfg.degrees.get(n - 2).copied().unwrap_or(cfg.glue.degree), ..cfg.glue.clone() };
        let (sh, gr) = weld(&ps, Some(cfg.h), &glue).map_err(wrap)?;
        drop(sh);
        log::info!("level {n} class {j}: welded {} windows, residual {:.3e}", points.len(), gr.dbar_residual);
        let mut windows = Vec::with_capacity(points.len());
        for (k, (&lambda, &label)) in points.iter().zip(&labels).enumerate() {
            let a_set = &gr.a_sets[k];
            let eroded = a_set.erode(r);
            let good = a_set.erode(delta / a_prev);
            let f_prev = &prev.classes[label].f;
            let g = *good.grid();
            let sup_on_good = good
                .members()
                .map(|idx| {
                    let z = g.node_at(idx);
                    (gr.poly.eval(z) - f_prev.eval((z - lambda) * a_prev)).norm()
                })
                .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
            windows.push(GoodWindow {
                lambda,
                label,
                area: a_set.measure().value,
                eroded_area: eroded.measure().value,
                eroded_area_nominal: a_set.erode(r_nominal).measure().value,
                max_cheb: max_cheb(&eroded, lambda),
                sup_inner: gr.report.e1[k].sup_inner,
                sup_on_good,
            });
        }
        classes.push(FClass {
            f: EntireFn::Poly { poly: gr.poly.clone(), scale: a_prev },
            mass: class.mass,
            fibers: class.fibers.len(),
            m: Some(m),
            patch_log_sup: Some(log_sup),
            glue: Some(gr.report.clone()),
            windows,
        });
    }
    seq.levels.push(FLevel {
        n,
        a: level.a,
        c: Some(c),
        modulus: Some(modulus),
        erosion: Some(r),
        nominal_erosion: Some(r_nominal),
        partition_cells: partition.cells.len(),
        max_cell_distance: level.max_cell_distance,
        mass: level.mass(),
        classes,
    });
    Ok(())
}

/// Everything a pipeline run produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub config: PipelineConfig,
    pub refinement: RefinementReport,
    pub sequence: FSequence,
    pub properties: PropertyReport,
}

/// Towers, model, `F_1 .. F_N` and the property report.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineRun, ConstructError> {
    cfg.validate()?;
    let towers = nested_refinement(&generate_geometry(&cfg.tower_params()?)?)?;
    let mut model = TowerModel::new(&towers, cfg.d, cfg.max_fibers)?;
    let mut seq = FSequence { b: cfg.b, a: towers.geometry.levels.iter().map(|l| l.a).collect(), levels: vec![level_one(&model)] };
    for _ in 1..cfg.levels {
        build_next(&mut model, &towers, &mut seq, cfg)?;
    }
    let properties = check_properties(&seq, &model, cfg)?;
    Ok(PipelineRun { config: cfg.clone(), refinement: towers.report.clone(), sequence: seq, properties })
}

/// `(1-B) ln 2 + ln M_B(m)`, the log of `2^{1-B} M_B(m)`.
pub(crate) fn log_cap(a: &[f64], b: f64, m: usize) -> f64 {
    (1.0 - b) * LN_2 + desk_log_mb(a, b, m)
}
