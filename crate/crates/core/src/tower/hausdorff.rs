use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::region::Rect;
use super::TowerError;

/// Finite set of points in the plane, an element of `K(ℂ)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FiniteSetH {
    pub points: Vec<Complex64>,
}

impl FiniteSetH {
    pub fn new(points: Vec<Complex64>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `sup_{a ∈ A} inf_{b ∈ B} |a - b|`.
pub fn directed_hausdorff(a: &FiniteSetH, b: &FiniteSetH) -> f64 {
    let inf = |p: &Complex64| b.points.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min);
    if a.len() * b.len() > 1 << 16 {
        a.points.par_iter().map(inf).reduce(|| 0.0, f64::max)
    } else {
        a.points.iter().map(inf).fold(0.0, f64::max)
    }
}

pub fn hausdorff(a: &FiniteSetH, b: &FiniteSetH) -> Result<f64, TowerError> {
    if a.is_empty() || b.is_empty() {
        return Err(TowerError::Empty);
    }
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}

/// `d_H` extended to possibly empty sets: 0 between two empty sets, `∞` against one.
pub fn fiber_distance(a: &FiniteSetH, b: &FiniteSetH) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => 0.0,
        (false, false) => directed_hausdorff(a, b).max(directed_hausdorff(b, a)),
        _ => f64::INFINITY,
    }
}

/// A fiber's return sets `R^ℓ(x)`, one per label `ℓ`.
pub type FiberSets = Vec<FiniteSetH>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub delta: f64,
    /// Fiber indices per cell, cells ordered by their lowest fiber.
    pub cells: Vec<Vec<usize>>,
    /// Ball centers of the greedy `δ/2` cover for each label.
    pub centers: Vec<Vec<usize>>,
}

impl Partition {
    /// Cell index of every fiber.
    pub fn labels(&self, fibers: usize) -> Vec<usize> {
        let mut out = vec![usize::MAX; fibers];
        for (c, cell) in self.cells.iter().enumerate() {
            for &x in cell {
                out[x] = c;
            }
        }
        out
    }
}

/// Greedy `δ/2`-ball cover per label, then the common refinement of the covers.
/// Every fiber joins the ball of the first center closer than `δ/2`.
pub fn delta_fine_partition(fibers: &[FiberSets], delta: f64) -> Result<Partition, TowerError> {
    if !(delta > 0.0) {
        return Err(TowerError::Input(format!("delta must be positive, got {delta}")));
    }
    let labels = fibers.first().map_or(0, |f| f.len());
    if fibers.iter().any(|f| f.len() != labels) {
        return Err(TowerError::Input("fibers carry different numbers of labels".into()));
    }
    let covers: Vec<(Vec<usize>, Vec<usize>)> = (0..labels)
        .into_par_iter()
        .map(|l| {
            let mut centers: Vec<usize> = Vec::new();
            let mut assign = Vec::with_capacity(fibers.len());
            for (x, f) in fibers.iter().enumerate() {
                match centers.iter().position(|&c| fiber_distance(&fibers[c][l], &f[l]) < delta / 2.0) {
                    Some(k) => assign.push(k),
                    None => {
                        assign.push(centers.len());
                        centers.push(x);
                    }
                }
            }
            (assign, centers)
        })
        .collect();
    let mut index: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let mut cells: Vec<Vec<usize>> = Vec::new();
    for x in 0..fibers.len() {
        let key: Vec<usize> = covers.iter().map(|(a, _)| a[x]).collect();
        let c = *index.entry(key).or_insert_with(|| {
            cells.push(Vec::new());
            cells.len() - 1
        });
        cells[c].push(x);
    }
    Ok(Partition { delta, cells, centers: covers.into_iter().map(|(_, c)| c).collect() })
}

/// Largest `max_ℓ d_H(R^ℓ(x), R^ℓ(y))` over pairs sharing a cell.
pub fn max_cell_distance(fibers: &[FiberSets], partition: &Partition) -> f64 {
    partition
        .cells
        .par_iter()
        .map(|cell| {
            let mut worst = 0.0f64;
            for (a, &x) in cell.iter().enumerate() {
                for &y in &cell[a + 1..] {
                    for l in 0..fibers[x].len() {
                        worst = worst.max(fiber_distance(&fibers[x][l], &fibers[y][l]));
                    }
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

pub fn is_delta_fine(fibers: &[FiberSets], partition: &Partition) -> bool {
    max_cell_distance(fibers, partition) < partition.delta
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonNet {
    pub eps: f64,
    /// `(1_{A ∩ B_j ≠ ∅})_j` for every input set.
    pub signatures: Vec<Vec<bool>>,
    /// Input indices sharing a signature, in order of first appearance.
    pub groups: Vec<Vec<usize>>,
    /// Lowest input index of each group.
    pub representatives: Vec<usize>,
    /// `{b_j : x_j = 1}` with `b_j` the center of cell `j`, one per group.
    pub net_sets: Vec<FiniteSetH>,
}

/// Signature grouping over a cover by cells of diameter `< eps`.
pub fn epsilon_net(sets: &[FiniteSetH], eps: f64, cover: &[Rect]) -> Result<EpsilonNet, TowerError> {
    if let Some(c) = cover.iter().find(|c| c.diameter() >= eps) {
        return Err(TowerError::Input(format!("cover cell {c:?} has diameter {} >= {eps}", c.diameter())));
    }
    let mut signatures = Vec::with_capacity(sets.len());
    for (k, s) in sets.iter().enumerate() {
        let mut sig = vec![false; cover.len()];
        for p in &s.points {
            let mut hit = false;
            for (j, c) in cover.iter().enumerate() {
                if c.contains_point(*p) {
                    sig[j] = true;
                    hit = true;
                }
            }
            if !hit {
                return Err(TowerError::Cover(format!("point {p} of set {k} lies in no cell")));
            }
        }
        signatures.push(sig);
    }
    let mut index: BTreeMap<&[bool], usize> = BTreeMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (k, sig) in signatures.iter().enumerate() {
        let g = *index.entry(sig.as_slice()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(k);
    }
    let representatives: Vec<usize> = groups.iter().map(|g| g[0]).collect();
    let net_sets = representatives
        .iter()
        .map(|&r| {
            FiniteSetH::new(
                cover
                    .iter()
                    .zip(&signatures[r])
                    .filter(|(_, &on)| on)
                    .map(|(c, _)| Complex64::new(0.5 * (c.x0 + c.x1), 0.5 * (c.y0 + c.y1)))
                    .collect(),
            )
        })
        .collect();
    Ok(EpsilonNet { eps, signatures, groups, representatives, net_sets })
}
