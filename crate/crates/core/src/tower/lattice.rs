use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::region::{Rect, RectRegion};
use super::{sequence_from, TowerError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerParams {
    /// Edges `a_1 < .. < a_N`.
    pub a: Vec<f64>,
    /// Coverage defects `ε_n` of the base towers.
    pub eps: Vec<f64>,
    pub seed: u64,
    /// Torus side; derived from the coverage targets when absent.
    pub side: Option<f64>,
    /// Squares per torus side for every level; derived when absent.
    pub per_side: Option<Vec<usize>>,
    /// Offsets of level `n` are multiples of `offset_quantum[n]`.
    pub offset_quantum: Option<Vec<f64>>,
    /// Bound on the number of enumerated squares over levels `2..N`.
    pub max_squares: usize,
}

impl TowerParams {
    pub fn new(a: Vec<f64>, eps: Vec<f64>, seed: u64) -> Self {
        Self { a, eps, seed, side: None, per_side: None, offset_quantum: None, max_squares: 4_000_000 }
    }
}

/// Base `B_n(0)`: squares `[o + i s, o + i s + 2a] × [o' + j s, o' + j s + 2a]` on the torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelLattice {
    pub a: f64,
    pub eps: f64,
    pub per_side: usize,
    pub spacing: f64,
    pub offset: (f64, f64),
    /// `μ(S_{a_n} B_n(0)) = (2 a N / L)²`.
    pub coverage: f64,
}

impl LevelLattice {
    pub fn count(&self) -> usize {
        self.per_side * self.per_side
    }

    /// Lower-left corner of square `(i, j)`, in `[0, L)²`.
    pub fn corner(&self, i: usize, j: usize) -> (f64, f64) {
        (self.offset.0 + i as f64 * self.spacing, self.offset.1 + j as f64 * self.spacing)
    }

    pub fn center(&self, i: usize, j: usize) -> Complex64 {
        let (x, y) = self.corner(i, j);
        Complex64::new(x + self.a, y + self.a)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerGeometry {
    pub side: f64,
    pub seed: u64,
    pub levels: Vec<LevelLattice>,
}

impl TowerGeometry {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Square of level `n` (0-based) as torus pieces.
    pub fn square_pieces(&self, n: usize, i: usize, j: usize) -> Vec<Rect> {
        let lv = &self.levels[n];
        let (x, y) = lv.corner(i, j);
        torus_pieces(Rect::new(x, y, x + 2.0 * lv.a, y + 2.0 * lv.a), self.side)
    }
}

/// Splits a rectangle with lower-left corner in `[0, L)²` along the torus seams.
fn torus_pieces(r: Rect, l: f64) -> Vec<Rect> {
    let xs = split(r.x0, r.x1, l);
    let ys = split(r.y0, r.y1, l);
    let mut out = Vec::with_capacity(4);
    for &(x0, x1) in &xs {
        for &(y0, y1) in &ys {
            out.push(Rect::new(x0, y0, x1, y1));
        }
    }
    out
}

fn split(a: f64, b: f64, l: f64) -> Vec<(f64, f64)> {
    let width = b - a;
    let a = a.rem_euclid(l);
    let b = a + width;
    if b <= l {
        vec![(a, b)]
    } else {
        vec![(a, l), (0.0, b - l)]
    }
}

pub fn generate_geometry(p: &TowerParams) -> Result<TowerGeometry, TowerError> {
    let n = p.a.len();
    if n == 0 || p.eps.len() != n {
        return Err(TowerError::Input(format!("{} edges and {} coverage defects", n, p.eps.len())));
    }
    if p.a.iter().any(|a| !(*a > 0.0)) || p.a.windows(2).any(|w| w[1] <= w[0]) {
        return Err(TowerError::Input("edges must be positive and increasing".into()));
    }
    if p.eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(TowerError::Input("coverage defects must lie in (0, 1)".into()));
    }
    let (side, per_side) = match (&p.side, &p.per_side) {
        (Some(l), Some(ns)) => {
            if ns.len() != n || !(*l > 0.0) {
                return Err(TowerError::Input("explicit layout does not match the levels".into()));
            }
            (*l, ns.clone())
        }
        (None, None) => derive_layout(&p.a, &p.eps)?,
        _ => return Err(TowerError::Input("side and per_side must be given together".into())),
    };
    let enumerated: usize = per_side.iter().skip(1).map(|k| k * k).sum();
    if enumerated > p.max_squares {
        return Err(TowerError::TooLarge(format!("{enumerated} squares on levels >= 2, limit {}", p.max_squares)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut levels = Vec::with_capacity(n);
    for k in 0..n {
        let (a, eps, m) = (p.a[k], p.eps[k], per_side[k]);
        if m == 0 {
            return Err(TowerError::Input(format!("level {} has no squares", k + 1)));
        }
        let spacing = side / m as f64;
        if spacing < 2.0 * a {
            return Err(TowerError::Input(format!("level {} squares overlap: spacing {spacing} < {}", k + 1, 2.0 * a)));
        }
        let coverage = (2.0 * a * m as f64 / side).powi(2);
        if coverage < 1.0 - eps {
            return Err(TowerError::Input(format!("level {} coverage {coverage} below 1 - {eps}", k + 1)));
        }
        let mut draw = || {
            let o = rng.gen_range(0.0..spacing);
            match p.offset_quantum.as_ref().map(|q| q[k]) {
                Some(q) if q > 0.0 => (o / q).floor() * q,
                _ => o,
            }
        };
        let offset = (draw(), draw());
        levels.push(LevelLattice { a, eps, per_side: m, spacing, offset, coverage });
    }
    Ok(TowerGeometry { side, seed: p.seed, levels })
}

/// Smallest top count for which every level admits `√(1-ε) L ≤ 2 a N ≤ L`.
fn derive_layout(a: &[f64], eps: &[f64]) -> Result<(f64, Vec<usize>), TowerError> {
    let top = a.len() - 1;
    for n_top in 1..=256usize {
        let side = n_top as f64 * 2.0 * a[top] / (1.0 - eps[top]).sqrt() * (1.0 - 1e-12);
        let counts: Vec<usize> = a
            .iter()
            .zip(eps)
            .map(|(&a, &e)| ((side * (1.0 - e).sqrt() / (2.0 * a)) * (1.0 - 1e-15)).ceil() as usize)
            .collect();
        if counts.iter().zip(a).all(|(&m, &a)| m >= 1 && 2.0 * a * m as f64 <= side) {
            return Ok((side, counts));
        }
    }
    Err(TowerError::Input("no lattice layout meets the coverage targets".into()))
}

/// Lattice position of one axis of a child level relative to the parent level.
#[derive(Clone, Debug)]
struct AxisMap {
    parent: Vec<usize>,
    /// Child corner minus parent corner.
    rel: Vec<f64>,
    /// `S_{a_j} x ⊂ S_{a_{j+1}} y` along this axis.
    inside: Vec<bool>,
}

fn axis_map(child: &LevelLattice, child_off: f64, parent: &LevelLattice, parent_off: f64, side: f64) -> AxisMap {
    let room = 2.0 * (parent.a - child.a);
    let tol = 1e-9 * parent.a.max(1.0);
    let m = parent.per_side;
    let mut out = AxisMap { parent: Vec::with_capacity(child.per_side), rel: Vec::new(), inside: Vec::new() };
    for i in 0..child.per_side {
        let u = child_off + i as f64 * child.spacing;
        let t = (u - parent_off).rem_euclid(side);
        let mut p = ((t / parent.spacing).floor() as usize).min(m - 1);
        let mut rel = t - p as f64 * parent.spacing;
        if rel > parent.spacing - tol {
            p = (p + 1) % m;
            rel -= parent.spacing;
        }
        out.parent.push(p);
        out.rel.push(rel);
        out.inside.push(rel >= -tol && rel <= room + tol);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub j: usize,
    pub k: usize,
    pub m: usize,
    pub mass_before: f64,
    pub mass_after: f64,
    pub loss: f64,
    /// `2ε_m + 4a_m/a_{m+1}`, with `a_{N+1} = ∞`.
    pub bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalRow {
    pub j: usize,
    pub coverage: f64,
    pub final_mass: f64,
    pub loss: f64,
    /// `(1 - coverage) + Σ_k` step bounds.
    pub triangle_bound: f64,
    /// `2 Σ_{k=j}^{N} (ε_k + 2a_k/a_{k+1})`.
    pub bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestingRow {
    pub j: usize,
    pub k: usize,
    /// Area of the level-`j` removed region outside the level-`j+1` removed region.
    pub excess_area: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub j: usize,
    /// Largest overlap length, along either axis, of a square removed at step 0
    /// with a shrunken parent `S_{a_{j+1} - 2a_j}`.
    pub worst_overlap: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub side: f64,
    pub a: Vec<f64>,
    pub eps: Vec<f64>,
    pub ratio_sum: f64,
    pub hypothesis_ok: bool,
    pub steps: Vec<StepRow>,
    pub finals: Vec<FinalRow>,
    pub nesting: Vec<NestingRow>,
    pub boundary: Vec<BoundaryRow>,
    pub masses_monotone: bool,
    pub containment_ok: bool,
    /// `μ(S_{a_n} B_n)` for `n = 1..N`.
    pub coverage: Vec<f64>,
    pub passed: bool,
}

/// Refined towers: `B_j(k)` for every level and step.
#[derive(Clone, Debug)]
pub struct NestedTowers {
    pub geometry: TowerGeometry,
    /// `maps[j]`: level `j` into level `j+1`, x and y.
    maps: Vec<(AxisMap, AxisMap)>,
    /// `masks[j][k]` for enumerated levels `j >= 1` (0-based); empty for level 0.
    masks: Vec<Vec<Vec<bool>>>,
    /// Retained level-0 count per step.
    base_counts: Vec<f64>,
    pub report: RefinementReport,
}

impl NestedTowers {
    /// Number of refinement steps; `B_j(k)` is stable for `k >= steps`.
    pub fn steps(&self) -> usize {
        self.geometry.depth().saturating_sub(1)
    }

    /// Final `B_n` of an enumerated level (`n >= 1`, 0-based), as lattice indices.
    pub fn retained(&self, n: usize) -> Vec<(usize, usize)> {
        let lv = &self.geometry.levels[n];
        let mask = &self.masks[n][self.steps()];
        (0..lv.count()).filter(|&s| mask[s]).map(|s| (s % lv.per_side, s / lv.per_side)).collect()
    }

    /// Retained children of a final level-`n` square, with centers relative to its center.
    pub fn children(&self, n: usize, parent: (usize, usize)) -> Vec<((usize, usize), Complex64)> {
        let (mx, my) = &self.maps[n - 1];
        let child = &self.geometry.levels[n - 1];
        let (pa, ca) = (self.geometry.levels[n].a, child.a);
        let xs: Vec<usize> = (0..child.per_side).filter(|&i| mx.inside[i] && mx.parent[i] == parent.0).collect();
        let ys: Vec<usize> = (0..child.per_side).filter(|&j| my.inside[j] && my.parent[j] == parent.1).collect();
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for &j in &ys {
            for &i in &xs {
                if n - 1 >= 1 && !self.masks[n - 1][self.steps()][j * child.per_side + i] {
                    continue;
                }
                out.push(((i, j), Complex64::new(mx.rel[i] + ca - pa, my.rel[j] + ca - pa)));
            }
        }
        out
    }

    /// `μ(S_{a_n} B_n(k))`.
    pub fn mass(&self, n: usize, k: usize) -> f64 {
        let lv = &self.geometry.levels[n];
        let count = if n == 0 {
            self.base_counts[k.min(self.steps())]
        } else {
            self.masks[n][k.min(self.steps())].iter().filter(|&&b| b).count() as f64
        };
        count * (2.0 * lv.a / self.geometry.side).powi(2)
    }

    /// Tube over the squares of enumerated level `n` selected by `keep`.
    fn level_region(&self, n: usize, keep: impl Fn(usize) -> bool) -> RectRegion {
        let lv = &self.geometry.levels[n];
        let mut rects = Vec::new();
        for s in (0..lv.count()).filter(|&s| keep(s)) {
            rects.extend(self.geometry.square_pieces(n, s % lv.per_side, s / lv.per_side));
        }
        RectRegion::new(rects)
    }

    /// Bounding boxes of the level-0 squares inside the level-1 parents selected by `keep`.
    fn base_blocks(&self, keep: impl Fn(usize) -> bool) -> RectRegion {
        let parent = &self.geometry.levels[1];
        let a0 = self.geometry.levels[0].a;
        let (mx, my) = &self.maps[0];
        let extent = |m: &AxisMap, p: usize| {
            let mut r: Option<(f64, f64)> = None;
            for i in (0..m.rel.len()).filter(|&i| m.inside[i] && m.parent[i] == p) {
                let (lo, hi) = (m.rel[i], m.rel[i] + 2.0 * a0);
                r = Some(r.map_or((lo, hi), |(a, b)| (a.min(lo), b.max(hi))));
            }
            r
        };
        let bx: Vec<_> = (0..parent.per_side).map(|p| extent(mx, p)).collect();
        let by: Vec<_> = (0..parent.per_side).map(|p| extent(my, p)).collect();
        let mut rects = Vec::new();
        for s in (0..parent.count()).filter(|&s| keep(s)) {
            let (p, q) = (s % parent.per_side, s / parent.per_side);
            if let (Some((x0, x1)), Some((y0, y1))) = (bx[p], by[q]) {
                let (cx, cy) = parent.corner(p, q);
                rects.extend(torus_pieces(Rect::new(cx + x0, cy + y0, cx + x1, cy + y1), self.geometry.side));
            }
        }
        RectRegion::new(rects)
    }

    /// `S_{a_j} B_j(k) \ S_{a_j} B_j(k+1)`.
    fn removed_region(&self, j: usize, k: usize) -> RectRegion {
        if j == 0 {
            let parent = &self.masks[1];
            self.base_blocks(|s| k >= 1 && parent[k - 1][s] && !parent[k][s])
        } else {
            let m = &self.masks[j];
            self.level_region(j, |s| m[k][s] && !m[k + 1][s])
        }
    }

    /// `S_{a_j} B_j` after the last step.
    fn final_region(&self, j: usize) -> RectRegion {
        let k = self.steps();
        if j == 0 {
            let parent = &self.masks[1];
            self.base_blocks(|s| parent[k][s])
        } else {
            self.level_region(j, |s| self.masks[j][k][s])
        }
    }
}

/// `B_j(k+1) = B_j(k) ∩ S_{a_{j+1} - a_j} B_{j+1}(k)`, top level fixed.
pub fn nested_refinement(geometry: &TowerGeometry) -> Result<NestedTowers, TowerError> {
    let depth = geometry.depth();
    if depth < 2 {
        return Err(TowerError::Input("refinement needs at least two levels".into()));
    }
    let seq = sequence_from(geometry.levels.iter().map(|l| l.a).collect());
    if !seq.hypothesis_ok {
        log::warn!("nested_refinement: Σ a_n/a_(n+1) = {} is not below 1/2", seq.ratio_sum);
    }
    let side = geometry.side;
    let lv = &geometry.levels;
    let maps: Vec<(AxisMap, AxisMap)> = (0..depth - 1)
        .map(|j| {
            (
                axis_map(&lv[j], lv[j].offset.0, &lv[j + 1], lv[j + 1].offset.0, side),
                axis_map(&lv[j], lv[j].offset.1, &lv[j + 1], lv[j + 1].offset.1, side),
            )
        })
        .collect();
    let steps = depth - 1;
    let mut masks: Vec<Vec<Vec<bool>>> = vec![Vec::new(); depth];
    for n in 1..depth {
        masks[n].push(vec![true; lv[n].count()]);
    }
    for k in 0..steps {
        for j in 1..depth {
            let prev = &masks[j][k];
            let next: Vec<bool> = if j == depth - 1 {
                prev.clone()
            } else {
                let (mx, my) = &maps[j];
                let parent = &masks[j + 1][k];
                let m = lv[j].per_side;
                let pm = lv[j + 1].per_side;
                (0..lv[j].count())
                    .map(|s| {
                        let (i, jj) = (s % m, s / m);
                        prev[s] && mx.inside[i] && my.inside[jj] && parent[my.parent[jj] * pm + mx.parent[i]]
                    })
                    .collect()
            };
            masks[j].push(next);
        }
    }
    let (mx, my) = &maps[0];
    let pm = lv[1].per_side;
    let mut cx = vec![0.0f64; pm];
    let mut cy = vec![0.0f64; pm];
    for i in 0..lv[0].per_side {
        if mx.inside[i] {
            cx[mx.parent[i]] += 1.0;
        }
        if my.inside[i] {
            cy[my.parent[i]] += 1.0;
        }
    }
    let mut base_counts = vec![(lv[0].per_side * lv[0].per_side) as f64];
    for k in 0..steps {
        let parent = &masks[1][k];
        let mut c = 0.0;
        for q in 0..pm {
            for p in 0..pm {
                if parent[q * pm + p] {
                    c += cx[p] * cy[q];
                }
            }
        }
        base_counts.push(c);
    }
    let mut towers = NestedTowers {
        geometry: geometry.clone(),
        maps,
        masks,
        base_counts,
        report: RefinementReport {
            side,
            a: seq.a.clone(),
            eps: lv.iter().map(|l| l.eps).collect(),
            ratio_sum: seq.ratio_sum,
            hypothesis_ok: seq.hypothesis_ok,
            steps: Vec::new(),
            finals: Vec::new(),
            nesting: Vec::new(),
            boundary: Vec::new(),
            masses_monotone: false,
            containment_ok: false,
            coverage: Vec::new(),
            passed: false,
        },
    };
    towers.report = build_report(&towers, seq.ratio_sum, seq.hypothesis_ok);
    Ok(towers)
}

fn step_bound(lv: &[LevelLattice], m: usize) -> f64 {
    let ratio = if m + 1 < lv.len() { lv[m].a / lv[m + 1].a } else { 0.0 };
    2.0 * lv[m].eps + 4.0 * ratio
}

fn build_report(t: &NestedTowers, ratio_sum: f64, hypothesis_ok: bool) -> RefinementReport {
    let g = &t.geometry;
    let lv = &g.levels;
    let depth = g.depth();
    let steps = t.steps();
    let area_tol = 1e-9 * g.side * g.side;
    let mut rows = Vec::new();
    for j in 0..depth - 1 {
        for k in 0..steps {
            let m = (j + k).min(depth - 1);
            let (before, after) = (t.mass(j, k), t.mass(j, k + 1));
            let bound = step_bound(lv, m);
            rows.push(StepRow {
                j: j + 1,
                k,
                m: m + 1,
                mass_before: before,
                mass_after: after,
                loss: before - after,
                bound,
                passed: before - after <= bound + 1e-12,
            });
        }
    }
    let mut finals = Vec::new();
    for j in 0..depth {
        let final_mass = t.mass(j, steps);
        let bound: f64 = (j..depth).map(|k| step_bound(lv, k)).sum();
        let refined = if j + 1 < depth { steps } else { 0 };
        let triangle_bound = (1.0 - lv[j].coverage) + (0..refined).map(|k| step_bound(lv, (j + k).min(depth - 1))).sum::<f64>();
        finals.push(FinalRow {
            j: j + 1,
            coverage: lv[j].coverage,
            final_mass,
            loss: 1.0 - final_mass,
            triangle_bound,
            bound,
            passed: 1.0 - final_mass <= bound.min(triangle_bound) + 1e-12,
        });
    }
    let mut nesting = Vec::new();
    for j in 0..depth - 1 {
        for k in 1..steps {
            let removed = t.removed_region(j, k);
            let excess = if removed.is_empty() {
                0.0
            } else {
                let upper = if j + 1 == depth - 1 { RectRegion::default() } else { t.removed_region(j + 1, k - 1) };
                upper.union(&removed).area() - upper.area()
            };
            nesting.push(NestingRow { j: j + 1, k, excess_area: excess, passed: excess <= area_tol });
        }
    }
    let boundary: Vec<BoundaryRow> = (0..depth - 1).map(|j| boundary_row(t, j)).collect();
    let coverage: Vec<f64> = (0..depth).map(|n| t.mass(n, steps)).collect();
    let masses_monotone = coverage.windows(2).all(|w| w[0] <= w[1] + 1e-12);
    let containment_ok = (0..depth - 1).all(|j| {
        let inner = t.final_region(j);
        let outer = t.final_region(j + 1);
        outer.union(&inner).area() - outer.area() <= area_tol
    });
    let passed = rows.iter().all(|r| r.passed)
        && finals.iter().all(|r| r.passed)
        && nesting.iter().all(|r| r.passed)
        && boundary_ok(&boundary)
        && masses_monotone
        && containment_ok;
    RefinementReport {
        side: g.side,
        a: lv.iter().map(|l| l.a).collect(),
        eps: lv.iter().map(|l| l.eps).collect(),
        ratio_sum,
        hypothesis_ok,
        steps: rows,
        finals,
        nesting,
        boundary,
        masses_monotone,
        containment_ok,
        coverage,
        passed,
    }
}

fn boundary_ok(rows: &[BoundaryRow]) -> bool {
    rows.iter().all(|r| r.passed)
}

/// `S_{a_j} B_j(0) \ S_{a_j} B_j(1) ⊆ X \ S_{a_{j+1} - 2a_j} B_{j+1}(0)`, checked per axis:
/// the bases are products of lattices, and a square fails the inclusion test
/// exactly when one of its axis intervals does.
fn boundary_row(t: &NestedTowers, j: usize) -> BoundaryRow {
    let g = &t.geometry;
    let (child, parent) = (&g.levels[j], &g.levels[j + 1]);
    let shrink = parent.a - 2.0 * child.a;
    let mut worst = 0.0f64;
    let (mx, my) = &t.maps[j];
    for (m, o, po) in [(mx, child.offset.0, parent.offset.0), (my, child.offset.1, parent.offset.1)] {
        for i in 0..m.rel.len() {
            if m.inside[i] || shrink <= 0.0 {
                continue;
            }
            let lo = o + i as f64 * child.spacing;
            for dp in [-1isize, 0, 1] {
                let p = m.parent[i] as isize + dp;
                let pc = po + p as f64 * parent.spacing + parent.a;
                // shifts by L cover parents across the seam
                for wrap in [-g.side, 0.0, g.side] {
                    let (s0, s1) = (pc + wrap - shrink, pc + wrap + shrink);
                    let overlap = (lo + 2.0 * child.a).min(s1) - lo.max(s0);
                    worst = worst.max(overlap);
                }
            }
        }
    }
    BoundaryRow { j: j + 1, worst_overlap: worst.max(0.0), passed: worst <= 1e-9 * parent.a.max(1.0) }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerPlacement {
    pub j: usize,
    pub center: Complex64,
    /// Distinct level-`j+1` squares met by `S_{a_j}(center)`.
    pub met: usize,
    pub pieces: Vec<Rect>,
    /// Corners covered by no met square.
    pub corners_in_gaps: usize,
    /// Corners covered by two or more met squares.
    pub corners_shared: usize,
    pub every_square_has_corner: bool,
    pub disjoint: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerReport {
    pub placements: usize,
    pub max_met: usize,
    pub histogram: [usize; 5],
    pub corners_in_gaps: usize,
    pub corners_shared: usize,
    pub all_disjoint: bool,
    pub all_have_corner: bool,
    pub passed: bool,
}

/// Intersections of `S_{a_j}(center)` (0-based `j`) with the level-`j+1` base squares.
pub fn corner_placement(g: &TowerGeometry, j: usize, center: Complex64) -> CornerPlacement {
    let (a, parent) = (g.levels[j].a, &g.levels[j + 1]);
    let small = Rect::square(center, a);
    let axis = |c: f64, off: f64| -> Vec<(isize, f64, f64)> {
        let i0 = ((c - a - off) / parent.spacing).floor() as isize;
        (i0 - 1..=i0 + 1)
            .filter_map(|i| {
                let lo = off + i as f64 * parent.spacing;
                let (x0, x1) = ((c - a).max(lo), (c + a).min(lo + 2.0 * parent.a));
                (x0 <= x1).then_some((i, x0, x1))
            })
            .collect()
    };
    let xs = axis(center.re, parent.offset.0);
    let ys = axis(center.im, parent.offset.1);
    let m = parent.per_side as isize;
    let mut ids: Vec<(isize, isize)> = Vec::new();
    let mut pieces: Vec<(usize, Rect)> = Vec::new();
    for &(i, x0, x1) in &xs {
        for &(jj, y0, y1) in &ys {
            let id = (i.rem_euclid(m), jj.rem_euclid(m));
            let slot = ids.iter().position(|&d| d == id).unwrap_or_else(|| {
                ids.push(id);
                ids.len() - 1
            });
            pieces.push((slot, Rect::new(x0, y0, x1, y1)));
        }
    }
    let mut hits = vec![false; ids.len()];
    let (mut gaps, mut shared) = (0, 0);
    for c in small.corners() {
        let owners: Vec<usize> = pieces.iter().filter(|(_, r)| r.contains_point(c)).map(|&(s, _)| s).collect();
        for &s in &owners {
            hits[s] = true;
        }
        let mut distinct = owners.clone();
        distinct.sort_unstable();
        distinct.dedup();
        match distinct.len() {
            0 => gaps += 1,
            1 => {}
            _ => shared += 1,
        }
    }
    let rects: Vec<Rect> = pieces.iter().map(|&(_, r)| r).collect();
    let sum: f64 = rects.iter().map(Rect::area).sum();
    let union = RectRegion::new(rects.clone()).area();
    CornerPlacement {
        j: j + 1,
        center,
        met: ids.len(),
        pieces: rects,
        corners_in_gaps: gaps,
        corners_shared: shared,
        every_square_has_corner: hits.iter().all(|&h| h),
        disjoint: (sum - union).abs() <= 1e-9 * a * a && union <= 4.0 * a * a * (1.0 + 1e-12),
    }
}

/// Random placements of `S_{a_j} x` over all non-top levels.
pub fn four_corner_check(g: &TowerGeometry, samples: usize, seed: u64) -> CornerReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CornerReport {
        placements: samples,
        max_met: 0,
        histogram: [0; 5],
        corners_in_gaps: 0,
        corners_shared: 0,
        all_disjoint: true,
        all_have_corner: true,
        passed: false,
    };
    let mut over = false;
    for _ in 0..samples {
        let j = rng.gen_range(0..g.depth() - 1);
        let c = Complex64::new(rng.gen_range(0.0..g.side), rng.gen_range(0.0..g.side));
        let p = corner_placement(g, j, c);
        report.max_met = report.max_met.max(p.met);
        if p.met <= 4 {
            report.histogram[p.met] += 1;
        } else {
            over = true;
        }
        report.corners_in_gaps += p.corners_in_gaps;
        report.corners_shared += p.corners_shared;
        report.all_disjoint &= p.disjoint;
        report.all_have_corner &= p.every_square_has_corner;
    }
    report.passed = !over && report.corners_shared == 0 && report.all_disjoint && report.all_have_corner;
    report
}

/// CSV rows `(j, k, retained mass, bound)`.
pub fn refinement_csv(report: &RefinementReport) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["j", "k", "m", "mass_before", "mass_after", "loss", "bound", "passed"])?;
    for r in &report.steps {
        w.serialize((r.j, r.k, r.m, r.mass_before, r.mass_after, r.loss, r.bound, r.passed))?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tower::a_sequence;

    fn d100(levels: usize, seed: u64) -> TowerGeometry {
        let a = a_sequence(100.0, levels).unwrap().a;
        generate_geometry(&TowerParams::new(a, vec![0.01; levels], seed)).unwrap()
    }

    #[test]
    fn derived_layout_meets_coverage() {
        let g = d100(3, 1);
        for lv in &g.levels {
            assert!(lv.coverage >= 1.0 - lv.eps && lv.spacing >= 2.0 * lv.a);
            assert!((lv.spacing * lv.per_side as f64 - g.side).abs() < 1e-9 * g.side);
        }
    }

    #[test]
    fn two_levels_a1_a2_100() {
        let mut p = TowerParams::new(vec![1.0, 100.0], vec![0.01, 0.01], 4);
        p.side = Some(201.0);
        p.per_side = Some(vec![100, 1]);
        let t = nested_refinement(&generate_geometry(&p).unwrap()).unwrap();
        let r = &t.report;
        let first = &r.steps[0];
        assert_eq!((first.j, first.k), (1, 0));
        assert!((first.bound - 0.06).abs() < 1e-15);
        assert!((first.mass_before - t.geometry.levels[0].coverage).abs() < 1e-15);
        assert!(first.passed, "{first:?}");
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn three_level_d100_refinement() {
        for seed in 0..3 {
            let t = nested_refinement(&d100(3, seed)).unwrap();
            let r = &t.report;
            assert!(r.hypothesis_ok);
            for row in &r.steps {
                assert!(row.passed, "{row:?}");
            }
            for row in &r.finals {
                assert!(row.passed, "{row:?}");
            }
            assert!(r.nesting.iter().all(|n| n.passed) && r.boundary.iter().all(|b| b.passed));
            assert!(r.masses_monotone && r.containment_ok && r.passed);
        }
    }

    #[test]
    fn removed_base_squares_lie_in_removed_parents() {
        // small explicit model where the middle level loses squares at step 0
        let mut p = TowerParams::new(vec![1.0, 4.0, 20.0], vec![0.2, 0.2, 0.2], 9);
        p.side = Some(42.0);
        p.per_side = Some(vec![20, 5, 1]);
        let t = nested_refinement(&generate_geometry(&p).unwrap()).unwrap();
        assert!(t.report.steps.iter().any(|r| r.j == 1 && r.k == 1 && r.loss > 0.0), "{:?}", t.report.steps);
        assert!(t.report.nesting.iter().all(|n| n.passed), "{:?}", t.report.nesting);
        let brute = |n: usize| -> f64 {
            // final squares counted from the definition
            let lv = &t.geometry.levels[n];
            let mut count = 0usize;
            for q in 0..lv.per_side {
                for pp in 0..lv.per_side {
                    let c = lv.center(pp, q);
                    let sq = Rect::square(c, lv.a);
                    let kept = if n == 2 {
                        true
                    } else {
                        let up = &t.geometry.levels[n + 1];
                        t.retained(n + 1).iter().any(|&(i, j)| {
                            let uc = up.center(i, j);
                            [-t.geometry.side, 0.0, t.geometry.side].iter().any(|&dx| {
                                [-t.geometry.side, 0.0, t.geometry.side]
                                    .iter()
                                    .any(|&dy| Rect::square(uc + Complex64::new(dx, dy), up.a).contains_rect(&sq, 1e-9))
                            })
                        })
                    };
                    count += kept as usize;
                }
            }
            count as f64 * (2.0 * lv.a / t.geometry.side).powi(2)
        };
        assert!((t.mass(1, t.steps()) - brute(1)).abs() < 1e-12);
    }

    #[test]
    fn children_sit_inside_their_parent() {
        let mut p = TowerParams::new(vec![1.0, 8.0, 64.0], vec![0.01; 3], 2);
        p.side = Some(128.5);
        p.per_side = Some(vec![64, 8, 1]);
        p.offset_quantum = Some(vec![1.0 / 256.0, 1.0 / 32.0, 1.0 / 32.0]);
        let t = nested_refinement(&generate_geometry(&p).unwrap()).unwrap();
        assert!(t.report.passed);
        for &parent in &t.retained(2) {
            let kids = t.children(2, parent);
            assert_eq!(kids.len(), 49);
            for (_, z) in &kids {
                assert!(z.re.abs() <= 56.0 + 1e-12 && z.im.abs() <= 56.0 + 1e-12);
                assert_eq!((z.re * 32.0).fract(), 0.0);
            }
        }
        for &parent in &t.retained(1) {
            assert_eq!(t.children(1, parent).len(), 49);
        }
    }

    fn gapless(a0: f64, a1: f64, per: usize) -> TowerGeometry {
        let mut p = TowerParams::new(vec![a0, a1], vec![0.01, 0.01], 0);
        p.side = Some(per as f64 * 2.0 * a1 * 1.001);
        p.per_side = Some(vec![per * (a1 / a0) as usize, per]);
        let mut g = generate_geometry(&p).unwrap();
        g.levels[1].offset = (0.0, 0.0);
        g
    }

    #[test]
    fn corner_examples() {
        let g = gapless(1.0, 10.0, 4);
        let inside = corner_placement(&g, 0, Complex64::new(10.0, 10.0));
        assert_eq!(inside.met, 1);
        assert_eq!(inside.corners_in_gaps, 0);
        let s = g.levels[1].spacing;
        let straddle = corner_placement(&g, 0, Complex64::new(s - 0.01, s - 0.01));
        assert_eq!(straddle.met, 4);
        assert!(straddle.disjoint && straddle.every_square_has_corner && straddle.corners_shared == 0);
        let area: f64 = straddle.pieces.iter().map(Rect::area).sum();
        assert!(area < 4.0 && area > 3.0);
    }

    #[test]
    fn thousand_random_placements() {
        let r = four_corner_check(&d100(3, 5), 1000, 17);
        assert!(r.max_met <= 4 && r.passed, "{r:?}");
        let r = four_corner_check(&gapless(1.0, 10.0, 4), 1000, 3);
        assert!(r.max_met <= 4 && r.passed && r.histogram[4] > 0, "{r:?}");
    }

    #[test]
    fn inconsistent_layouts_are_rejected() {
        let mut p = TowerParams::new(vec![1.0, 10.0], vec![0.01, 0.01], 0);
        p.side = Some(20.0);
        p.per_side = Some(vec![10, 2]);
        assert!(matches!(generate_geometry(&p), Err(TowerError::Input(_))));
        p.per_side = Some(vec![9, 1]);
        assert!(matches!(generate_geometry(&p), Err(TowerError::Input(_))));
        let mut big = TowerParams::new(vec![1.0, 2.0], vec![0.5, 0.5], 0);
        big.side = Some(100.0);
        big.per_side = Some(vec![40, 20]);
        big.max_squares = 399;
        assert!(matches!(generate_geometry(&big), Err(TowerError::TooLarge(_))));
    }
}
