use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::pipeline::log_cap;
use super::{f1_measures, loss_series, nonconstancy_chain, ChainBound, ConstructError, F1Measures, FSequence, PipelineConfig};
use crate::fields::Square;
use crate::tower::TowerModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct B1Report {
    /// `δ_n - max cell distance`: room left inside `S_{a_{n-1}}` for any `x ∈ G_n`.
    pub margin: f64,
    /// Margin measured on the eroded good sets; absent when they are empty.
    pub good_set_margin: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct B3Report {
    /// `10^{-2n}`.
    pub nominal_threshold: f64,
    /// Largest weld residual of the level.
    pub residual: f64,
    /// `max(10^{-2n}, 10 × residual)`.
    pub eta: f64,
    /// `sup |F_n - F_{n-1}|` over `S_{a_{n-2}}` around every level-`(n-1)` point.
    pub sup: f64,
    /// The same difference over the good sets `A_λ^{-δ_n/a_{n-1}}`.
    pub sup_on_good: Option<f64>,
    pub passed: bool,
    pub nominal_passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct B4Report {
    pub m: usize,
    /// `ln max |F_n|` over `S_{a_m}` around every level-`(n-1)` point.
    pub log_max: f64,
    /// `ln(exp(2^{1-B} M_B(m+1)) + Σ_{j<=n} 10^{-2j})`.
    pub log_bound: f64,
    pub margin: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct B5Report {
    /// `max_j ln max_{S_{a_n}} |F_n^j|`.
    pub log_max: f64,
    /// `ln ln max`, absent when the maximum is at most `e`.
    pub log_log_max: Option<f64>,
    /// `ln(2^{1-B} M_B(n+1))`.
    pub log_log_bound: f64,
    /// Absent together with `log_log_max`; the bound then holds trivially.
    pub margin: Option<f64>,
    /// Every class passed the weld's own growth check.
    pub weld_growth_ok: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AReport {
    /// `μ(X_{n-1})`, `μ(X_n)`.
    pub mass_prev: f64,
    pub mass: f64,
    /// `μ(G_n)` with the erosion used for `G_n`.
    pub good_mass: f64,
    /// `μ(G_n)` with the erosion `1 + a_{n-2}`.
    pub good_mass_nominal: f64,
    /// `μ(X_n \ G_n) - μ(X_n \ X_{n-1})`.
    pub excess: f64,
    /// `2/a_{n-1} + Σ_j μ_j #Λ_j a_{n-1}² (160/C + 200 r) / (4 a_n²)`.
    pub bound: f64,
    /// The bound is at least 1 and so says nothing.
    pub vacuous: bool,
    /// `(1 + a_{n-2})/a_{n-1} + a_{n-1}/a_n`.
    pub reference: f64,
    pub implied_constant: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelProperties {
    pub n: usize,
    #[serde(rename = "C")]
    pub c: f64,
    pub delta: f64,
    pub delta_extrapolated: bool,
    pub classes: usize,
    pub partition_cells: usize,
    pub b1: B1Report,
    /// Holomorphy test of every weld.
    pub b2: bool,
    /// Absent for `n < 3`.
    pub b3: Option<B3Report>,
    /// B4′ for `1 <= m <= n - 2`.
    pub b4: Vec<B4Report>,
    pub b5: B5Report,
    pub a: AReport,
    /// Every window passed the weld's approximation check.
    pub e1: bool,
    /// `μ(|F_n| <= 1/3)` sampled on the model.
    pub small_measure: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelescopingReport {
    /// `(n, sup_{S_{a_1}} |F_n - F_{n-1}|)` for `n >= 3`.
    pub terms: Vec<(usize, f64)>,
    pub partial_sums: Vec<f64>,
    /// Every term is below its `η_n`.
    pub cauchy: bool,
    /// `Σ_k (μ(X_k \ X_{k-1}) + excess_k)`.
    pub measure_accounting: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonconstancyReport {
    pub f1: F1Measures,
    /// Chain with the loss `Σ 1/(D k ln²k)`.
    pub chain: ChainBound,
    /// Chain with the measured losses `μ(G_m^c)`.
    pub measured_chain: f64,
    /// `μ(|F_N| <= 1/3)` at the top level.
    pub small_measure: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    #[serde(rename = "B")]
    pub b: f64,
    pub a: Vec<f64>,
    pub log_mb: Vec<f64>,
    pub levels: Vec<LevelProperties>,
    pub telescoping: TelescopingReport,
    pub nonconstancy: NonconstancyReport,
    /// Class counts equal partition cell counts on every level.
    pub classes_match_partition: bool,
    /// B1, B2 and B5 on every level.
    pub core_passed: bool,
    pub passed: bool,
}

/// `ln(e^x + e^y)`.
fn log_add(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `per_side²` samples of a square.
fn square_samples(sq: &Square, per_side: usize) -> impl Iterator<Item = Complex64> + '_ {
    let k = per_side.max(2);
    (0..k * k).map(move |idx| {
        let (i, j) = (idx % k, idx / k);
        let t = |m: usize| -sq.half_edge + 2.0 * sq.half_edge * m as f64 / (k - 1) as f64;
        sq.center + Complex64::new(t(i), t(j))
    })
}

/// Checks B1–B5, B4′, (A), the telescoping sums and nonconstancy.
pub fn check_properties(seq: &FSequence, model: &TowerModel, cfg: &PipelineConfig) -> Result<PropertyReport, ConstructError> {
    let a = &seq.a;
    let b = seq.b;
    let top = seq.levels.len();
    if model.levels.len() < top {
        return Err(ConstructError::Input(format!("model has {} levels, sequence {top}", model.levels.len())));
    }
    let mut levels = Vec::new();
    let mut classes_match = true;
    for lv in seq.levels.iter().skip(1) {
        let n = lv.n;
        let (a_prev, a_n) = (a[n - 2], a[n - 1]);
        let a_prev2 = if n >= 3 { a[n - 3] } else { 0.0 };
        let c = lv.c.unwrap_or(a_n / a_prev);
        let modulus = lv.modulus.clone().ok_or_else(|| ConstructError::Input(format!("level {n} has no modulus")))?;
        let r = lv.erosion.unwrap_or(0.0);
        let prev = &seq.levels[n - 2];
        classes_match &= lv.classes.len() == lv.partition_cells;

        let b1_margin = modulus.delta - lv.max_cell_distance;
        let good_set_margin = lv
            .classes
            .iter()
            .flat_map(|cl| cl.windows.iter().filter_map(|w| w.max_cheb))
            .map(|mc| a_prev - (a_prev * mc + a_prev2 + lv.max_cell_distance))
            .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.min(x))));
        let b1 = B1Report { margin: b1_margin, good_set_margin, passed: b1_margin > 0.0 && good_set_margin.map_or(true, |m| m > 0.0) };

        let b2 = lv.classes.iter().all(|cl| cl.glue.as_ref().map_or(true, |g| g.holomorphy_ok));
        let residual = lv.classes.iter().filter_map(|cl| cl.glue.as_ref().map(|g| g.dbar_residual)).fold(0.0, f64::max);

        // differences and maxima on S_{ρ}(λ) in the scaled variable
        let window_sup = |rho: f64, f: &dyn Fn(usize, Complex64, Complex64, usize) -> f64| -> Result<f64, ConstructError> {
            let mut worst = f64::NEG_INFINITY;
            for (j, cl) in lv.classes.iter().enumerate() {
                for w in &cl.windows {
                    let sq = Square::new(w.lambda, rho)?;
                    for z in square_samples(&sq, cfg.grid_n) {
                        worst = worst.max(f(j, z, w.lambda, w.label));
                    }
                }
            }
            Ok(worst)
        };
        let eval_n = |j: usize, z: Complex64| lv.classes[j].f.eval(z * a_prev);

        let b3 = if n >= 3 {
            let sup = window_sup(a_prev2 / a_prev, &|j, z, lambda, l| (eval_n(j, z) - prev.classes[l].f.eval((z - lambda) * a_prev)).norm())?;
            let sup_on_good = lv
                .classes
                .iter()
                .flat_map(|cl| cl.windows.iter().filter_map(|w| w.sup_on_good))
                .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
            let nominal_threshold = 10f64.powi(-2 * n as i32);
            let eta = nominal_threshold.max(10.0 * residual);
            Some(B3Report { nominal_threshold, residual, eta, sup, sup_on_good, passed: sup < eta, nominal_passed: sup < nominal_threshold })
        } else {
            None
        };

        let tail: f64 = (1..=n).map(|j| 10f64.powi(-2 * j as i32)).sum();
        let mut b4 = Vec::new();
        for m in 1..=n.saturating_sub(2) {
            let log_max = window_sup(a[m - 1] / a_prev, &|j, z, _, _| eval_n(j, z).norm().ln())?;
            let log_bound = log_add(log_cap(a, b, m + 1).exp(), tail.ln());
            let margin = log_bound - log_max;
            b4.push(B4Report { m, log_max, log_bound, margin, passed: margin >= 0.0 });
        }

        let sq_n = Square::centered(a_n)?;
        let log_max = lv
            .classes
            .iter()
            .map(|cl| cl.f.log_max_on_square(&sq_n, cfg.glue.e2_samples))
            .fold(f64::NEG_INFINITY, f64::max);
        let log_log_max = (log_max > 1.0).then(|| log_max.ln());
        let log_log_bound = log_cap(a, b, n + 1);
        let weld_growth_ok = lv.classes.iter().all(|cl| cl.glue.as_ref().map_or(true, |g| g.e2.passed));
        let b5_margin = log_log_max.map(|l| log_log_bound - l);
        let b5 = B5Report {
            log_max,
            log_log_max,
            log_log_bound,
            margin: b5_margin,
            weld_growth_ok,
            passed: b5_margin.map_or(true, |m| m >= 0.0) && weld_growth_ok,
        };

        let norm = 4.0 * a_n * a_n;
        let good_mass: f64 = lv
            .classes
            .iter()
            .map(|cl| cl.mass / norm * cl.windows.iter().map(|w| a_prev * a_prev * w.eroded_area).sum::<f64>())
            .sum();
        let good_mass_nominal: f64 = lv
            .classes
            .iter()
            .map(|cl| cl.mass / norm * cl.windows.iter().map(|w| a_prev * a_prev * w.eroded_area_nominal).sum::<f64>())
            .sum();
        let mass_prev = prev.mass;
        let excess = mass_prev - good_mass;
        let bound = 2.0 / a_prev
            + lv
                .classes
                .iter()
                .map(|cl| cl.mass / norm * cl.windows.len() as f64 * a_prev * a_prev * (160.0 / c + 200.0 * r))
                .sum::<f64>();
        let reference = (1.0 + a_prev2) / a_prev + a_prev / a_n;
        let a_rep = AReport {
            mass_prev,
            mass: lv.mass,
            good_mass,
            good_mass_nominal,
            excess,
            bound,
            vacuous: bound >= 1.0,
            reference,
            implied_constant: excess / reference,
            passed: excess <= bound,
        };

        let e1 = lv.classes.iter().all(|cl| cl.glue.as_ref().map_or(true, |g| g.e1.iter().all(|e| e.passed)));
        let small_measure = small_measure(seq, n, cfg.grid_n.max(257))?;
        levels.push(LevelProperties {
            n,
            c,
            delta: modulus.delta,
            delta_extrapolated: modulus.extrapolated,
            classes: lv.classes.len(),
            partition_cells: lv.partition_cells,
            b1,
            b2,
            b3,
            b4,
            b5,
            a: a_rep,
            e1,
            small_measure,
        });
    }

    let terms: Vec<(usize, f64)> = levels.iter().filter_map(|l| l.b3.as_ref().map(|b3| (l.n, b3.sup))).collect();
    let partial_sums = terms.iter().scan(0.0, |s, &(_, d)| {
        *s += d;
        Some(*s)
    }).collect();
    let cauchy = levels.iter().filter_map(|l| l.b3.as_ref()).all(|b3| b3.passed);
    let mass1 = seq.levels[0].mass;
    let measure_accounting = (1.0 - mass1) + levels.iter().map(|l| (l.a.mass - l.a.mass_prev) + l.a.excess.max(0.0)).sum::<f64>();
    let telescoping = TelescopingReport { terms, partial_sums, cauchy, measure_accounting };

    let f1 = f1_measures(mass1)?;
    let chain = nonconstancy_chain(mass1, loss_series() / cfg.d)?;
    let measured_chain = f1.small - (1.0 - mass1) - levels.iter().map(|l| 1.0 - l.a.good_mass).sum::<f64>();
    let small_top = levels.last().map_or(PI / 36.0 * mass1, |l| l.small_measure);
    let nonconstancy = NonconstancyReport { passed: chain.passed && small_top >= 0.01, f1, chain, measured_chain, small_measure: small_top };

    let core_passed = levels.iter().all(|l| l.b1.passed && l.b2 && l.b5.passed);
    let passed = core_passed
        && classes_match
        && levels.iter().all(|l| l.b3.as_ref().map_or(true, |b| b.passed) && l.b4.iter().all(|r| r.passed) && l.a.passed)
        && nonconstancy.passed;
    let log_mb = (1..=top + 1).map(|m| super::desk_log_mb(a, b, m)).collect();
    Ok(PropertyReport {
        b,
        a: a.clone(),
        log_mb,
        levels,
        telescoping,
        nonconstancy,
        classes_match_partition: classes_match,
        core_passed,
        passed,
    })
}

/// `Σ_j μ(S_{a_n} B_n^j) · m({|F_n^j| <= 1/3}) / m(S_{a_n})` by midpoint sampling.
fn small_measure(seq: &FSequence, n: usize, per_side: usize) -> Result<f64, ConstructError> {
    let lv = &seq.levels[n - 1];
    let a_n = lv.a;
    let mut total = 0.0;
    for cl in &lv.classes {
        let mut hits = 0usize;
        for i in 0..per_side {
            for j in 0..per_side {
                let t = |m: usize| a_n * (-1.0 + (2 * m + 1) as f64 / per_side as f64);
                hits += (cl.f.eval(Complex64::new(t(i), t(j))).norm() <= 1.0 / 3.0) as usize;
            }
        }
        total += cl.mass * hits as f64 / (per_side * per_side) as f64;
    }
    Ok(total)
}
