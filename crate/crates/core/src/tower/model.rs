use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hausdorff::{delta_fine_partition, max_cell_distance, FiberSets, FiniteSetH, Partition};
use super::lattice::NestedTowers;
use super::TowerError;

/// A base point `x` of `B_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberModel {
    /// Lattice index of its square.
    pub index: (usize, usize),
    pub center: Complex64,
    /// `μ(S_{a_n} x) = (2a_n)²/L²`.
    pub weight: f64,
    /// Offset applied to its return sets in partition experiments.
    pub jitter: Complex64,
}

/// One cell `B_n^j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassModel {
    /// `μ(S_{a_n} B_n^j)`.
    pub mass: f64,
    pub fibers: Vec<FiberModel>,
    /// `Λ_n^j`: child centers relative to the representative, divided by `a_{n-1}`, with labels.
    pub configuration: Vec<(Complex64, usize)>,
    /// Index into `fibers`.
    pub representative: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelModel {
    pub a: f64,
    pub eps: f64,
    /// `δ_n` of the partition, absent on level 1.
    pub delta: Option<f64>,
    /// Largest in-cell `max_ℓ d_H` of the partition.
    pub max_cell_distance: f64,
    pub classes: Vec<ClassModel>,
}

impl LevelModel {
    pub fn mass(&self) -> f64 {
        self.classes.iter().map(|c| c.mass).sum()
    }

    /// Class of the fiber with the given lattice index.
    pub fn class_of(&self, index: (usize, usize)) -> Option<usize> {
        self.classes.iter().position(|c| c.fibers.iter().any(|f| f.index == index))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerModel {
    pub d: f64,
    pub seed: u64,
    pub side: f64,
    pub levels: Vec<LevelModel>,
    pub max_fibers: usize,
}

impl TowerModel {
    /// Level 1 as a single class holding every final base point.
    pub fn new(towers: &NestedTowers, d: f64, max_fibers: usize) -> Result<Self, TowerError> {
        let g = &towers.geometry;
        let lv = &g.levels[0];
        let weight = (2.0 * lv.a / g.side).powi(2);
        let mass = towers.mass(0, towers.steps());
        let count = mass / weight;
        if count > max_fibers as f64 {
            return Err(TowerError::TooLarge(format!("{count} level-1 fibers, limit {max_fibers}")));
        }
        let mut fibers = Vec::new();
        for parent in towers.retained(1) {
            for (index, _) in towers.children(1, parent) {
                fibers.push(FiberModel { index, center: lv.center(index.0, index.1), weight, jitter: Complex64::new(0.0, 0.0) });
            }
        }
        fibers.sort_by_key(|f| (f.index.1, f.index.0));
        let class = ClassModel { mass: fibers.len() as f64 * weight, fibers, configuration: Vec::new(), representative: 0 };
        let level = LevelModel { a: lv.a, eps: lv.eps, delta: None, max_cell_distance: 0.0, classes: vec![class] };
        Ok(Self { d, seed: g.seed, side: g.side, levels: vec![level], max_fibers })
    }

    /// Partitions the final level-`n` fibers by their return sets `R_n^ℓ`
    /// (unscaled, relative to the fiber) into a `δ`-fine partition.
    /// `jitter = (amplitude, seed)` shifts each fiber's sets by a random offset.
    pub fn add_level(
        &mut self,
        towers: &NestedTowers,
        delta: f64,
        jitter: Option<(f64, u64)>,
    ) -> Result<Partition, TowerError> {
        let n = self.levels.len();
        let g = &towers.geometry;
        if n >= g.depth() {
            return Err(TowerError::Input(format!("the towers have only {} levels", g.depth())));
        }
        let lv = &g.levels[n];
        let prev = &self.levels[n - 1];
        let labels = prev.classes.len();
        let parents = towers.retained(n);
        if parents.len() > self.max_fibers {
            return Err(TowerError::TooLarge(format!("{} level-{} fibers, limit {}", parents.len(), n + 1, self.max_fibers)));
        }
        let mut lookup = std::collections::HashMap::new();
        for (c, class) in prev.classes.iter().enumerate() {
            for f in &class.fibers {
                lookup.insert(f.index, c);
            }
        }
        let mut rng = jitter.map(|(_, s)| ChaCha8Rng::seed_from_u64(s));
        let weight = (2.0 * lv.a / g.side).powi(2);
        let mut fibers = Vec::with_capacity(parents.len());
        let mut sets: Vec<FiberSets> = Vec::with_capacity(parents.len());
        let mut configs = Vec::with_capacity(parents.len());
        for &p in &parents {
            let shift = match (&mut rng, jitter) {
                (Some(r), Some((amp, _))) => Complex64::from_polar(r.gen_range(0.0..amp), r.gen_range(0.0..std::f64::consts::TAU)),
                _ => Complex64::new(0.0, 0.0),
            };
            let mut per_label = vec![FiniteSetH::default(); labels];
            let mut config = Vec::new();
            for (child, z) in towers.children(n, p) {
                let l = *lookup
                    .get(&child)
                    .ok_or_else(|| TowerError::Input(format!("child {child:?} of {p:?} has no level-{} class", n)))?;
                per_label[l].points.push(z + shift);
                config.push((z / prev.a, l));
            }
            fibers.push(FiberModel { index: p, center: lv.center(p.0, p.1), weight, jitter: shift });
            sets.push(per_label);
            configs.push(config);
        }
        let partition = delta_fine_partition(&sets, delta)?;
        let classes = partition
            .cells
            .iter()
            .map(|cell| ClassModel {
                mass: cell.len() as f64 * weight,
                fibers: cell.iter().map(|&x| fibers[x].clone()).collect(),
                configuration: configs[cell[0]].clone(),
                representative: 0,
            })
            .collect();
        self.levels.push(LevelModel {
            a: lv.a,
            eps: lv.eps,
            delta: Some(delta),
            max_cell_distance: max_cell_distance(&sets, &partition),
            classes,
        });
        Ok(partition)
    }

    /// Violated invariants, empty when the model is consistent.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut last = 0.0;
        for (n, lv) in self.levels.iter().enumerate() {
            let m = lv.mass();
            if m > 1.0 + 1e-12 {
                out.push(format!("level {} mass {m} exceeds 1", n + 1));
            }
            if m + 1e-12 < last {
                out.push(format!("level {} mass {m} below level {} mass {last}", n + 1, n));
            }
            last = m;
            let labels = if n == 0 { 0 } else { self.levels[n - 1].classes.len() };
            for (j, c) in lv.classes.iter().enumerate() {
                if c.configuration.iter().any(|&(_, l)| l >= labels) {
                    out.push(format!("level {} class {} has an invalid label", n + 1, j + 1));
                }
                for (k, &(p, _)) in c.configuration.iter().enumerate() {
                    for &(q, _) in &c.configuration[k + 1..] {
                        if (p.re - q.re).abs().max((p.im - q.im).abs()) <= 2.0 {
                            out.push(format!("level {} class {} has points {p} and {q} within 2", n + 1, j + 1));
                        }
                    }
                }
            }
        }
        out
    }
}
