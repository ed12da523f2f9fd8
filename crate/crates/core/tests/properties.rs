//! Randomized structural properties across modules.

use holoweld::construct::{growth_ledger, LedgerGrid, LedgerParams};
use holoweld::eglue::{build_cutoff, check_cutoff, dbar_g, AnalyticPatchSet};
use holoweld::fields::{ComplexField, Grid, RasterSet, RealField, Square};
use holoweld::shglue::{bounding_domain, domain_grid, glue_subharmonic, ShGlueParams, SubharmonicPatchSet};
use holoweld::tower::{a_sequence, delta_fine_partition, generate_geometry, hausdorff, nested_refinement, FiniteSetH, TowerParams};
use holoweld::windows::{check_subharmonic, intruding_rectangles, random_configuration, Configuration, WindowSystem};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn poly(rng: &mut ChaCha8Rng, degree: usize) -> Vec<Complex64> {
    (0..=degree).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn horner(co: &[Complex64], z: Complex64) -> Complex64 {
    co.iter().rev().fold(c(0.0, 0.0), |acc, &a| acc * z + a)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn window_cells_and_rectangles_are_bounded(seed in any::<u64>(), n in 1usize..9, ci in 0usize..3) {
        let cc = [8.0, 12.0, 16.0][ci];
        let h = 1.0 / (8.0 * cc);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = random_configuration(&mut rng, n, 4.0, cc, h, 2.0).unwrap();
        let ws = WindowSystem::build(&cfg, h).unwrap();
        for k in 0..cfg.len() {
            prop_assert!(ws.a_set(k).len() <= 4);
            prop_assert!(intruding_rectangles(&ws, k).len() <= 20);
        }
        for b in ws.b_sets().values() {
            prop_assert!(b.len() <= 4);
        }
    }

    #[test]
    fn removing_a_separated_point_keeps_v_on_the_window(seed in any::<u64>(), n in 2usize..7) {
        let cc = 8.0;
        let h = 1.0 / 64.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = random_configuration(&mut rng, n, 4.0, cc, h, 2.0).unwrap();
        let ws = WindowSystem::build(&cfg, h).unwrap();
        let pts = cfg.points();
        for k in 0..pts.len() {
            let Some(m) = (0..pts.len()).find(|&m| m != k && ws.a_set(m).iter().all(|a| !ws.a_set(k).contains(a))) else {
                continue;
            };
            let rest: Vec<Complex64> = pts.iter().enumerate().filter(|&(i, _)| i != m).map(|(_, &p)| p).collect();
            let smaller = WindowSystem::build(&Configuration::new(rest, None, cc).unwrap(), h).unwrap();
            let (before, after) = (&ws.windows()[k], &smaller.windows()[if k < m { k } else { k - 1 }]);
            prop_assert_eq!(before.grid, after.grid);
            let s1 = Square::new(pts[k], 1.0).unwrap();
            for (idx, (x, y)) in before.v.values().iter().zip(after.v.values()).enumerate() {
                if s1.contains_tol(before.grid.node_at(idx), 1e-9 * h) {
                    prop_assert_eq!(x, y, "node {}", before.grid.node_at(idx));
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn window_function_is_subharmonic(seed in any::<u64>(), n in 1usize..5) {
        let cc = 8.0;
        let h = 1.0 / 64.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = random_configuration(&mut rng, n, 3.0, cc, h, 2.0).unwrap();
        let ws = WindowSystem::build(&cfg, h).unwrap();
        for e in check_subharmonic(&ws).unwrap() {
            prop_assert_eq!(e.report.failures, 0, "{:?}", e);
        }
    }

    #[test]
    fn subharmonic_glue_is_exact_nonnegative_and_subharmonic(seed in any::<u64>(), n in 1usize..5) {
        let (cc, m) = (8.0, 5.0);
        let h = 1.0 / 64.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = random_configuration(&mut rng, n, 3.0, cc, h, 2.0).unwrap();
        let g = Grid::on_lattice(c(0.0, 0.0), 1.0, h).unwrap();
        let patches: Vec<RealField> = (0..cfg.len())
            .map(|_| {
                let co = poly(&mut rng, 3);
                let raw = RealField::sample(g, |z| horner(&co, z).norm().ln().max(0.0)).unwrap();
                let s = raw.sup_norm(None).unwrap().max(1e-12);
                raw.map(|_, v| v * (m / s).min(1.0)).unwrap()
            })
            .collect();
        let ps = SubharmonicPatchSet::new(cfg.clone(), patches, m).unwrap();
        let dom = bounding_domain(&cfg, 0.5).unwrap();
        let r = glue_subharmonic(&ps, &ShGlueParams { h, domain: Some(dom), enforce_hypotheses: true }).unwrap();
        prop_assert!(r.u.values().iter().all(|&x| x >= 0.0));
        prop_assert!(r.report.nonnegative);
        for e in &r.report.sh1 {
            prop_assert_eq!(e.mismatches, 0);
        }
        for e in &r.report.sh3 {
            prop_assert!(e.seam_ok, "{:?}", e);
        }
        prop_assert_eq!(r.report.subharmonic.failures, 0);
    }

    #[test]
    fn cutoff_and_rhs_support(seed in any::<u64>(), n in 1usize..4) {
        let cc = 8.0;
        let h = 1.0 / (32.0 * cc);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = random_configuration(&mut rng, n, 3.0, cc, h, 2.0).unwrap();
        let ws = WindowSystem::build(&cfg, h).unwrap();
        let d: Vec<RasterSet> = ws.windows().iter().map(|w| w.d.clone()).collect();
        let dom = domain_grid(&bounding_domain(&cfg, 1.0 / cc + 4.0 * h).unwrap(), h).unwrap();
        let cut = build_cutoff(&d, &dom, cc).unwrap();
        let rep = check_cutoff(&cut, &d, cc).unwrap();
        prop_assert!(rep.passed, "{:?}", rep);
        prop_assert!(cut.gradient_bound <= 100.0 * cc);

        let pg = Grid::on_lattice(c(0.0, 0.0), 1.0, h).unwrap();
        let patches: Vec<ComplexField> = (0..cfg.len())
            .map(|_| {
                let co = poly(&mut rng, 2);
                ComplexField::sample(pg, |z| horner(&co, z) * 0.25).unwrap()
            })
            .collect();
        let ps = AnalyticPatchSet::new(cfg.clone(), patches, 400.0, 10.0).unwrap();
        let rhs = dbar_g(&ps, &cut).unwrap();
        // transition band D^{+3/4C} \ D^{+1/4C}, widened by one node for the difference stencil
        let bands: Vec<(RasterSet, RasterSet)> =
            d.iter().map(|dk| (dk.dilate(3.0 / (4.0 * cc) + h), dk.dilate(1.0 / (4.0 * cc) - h))).collect();
        for (t, v) in rhs.values().iter().enumerate() {
            if v.norm() == 0.0 {
                continue;
            }
            let z = dom.node_at(t);
            let inside = bands.iter().any(|(outer, inner)| {
                outer.grid().nearest(z).is_some_and(|(i, j)| {
                    (outer.grid().node_at(i + j * outer.grid().n()) - z).norm() < 1e-9 && outer.get(i, j) && !inner.get(i, j)
                })
            });
            prop_assert!(inside, "∂̄g off the band at {}", z);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn delta_fine_cells_are_pairwise_close(seed in any::<u64>(), delta in 0.05f64..2.0, fibers in 2usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = |rng: &mut ChaCha8Rng, k: usize| FiniteSetH::new((0..k).map(|_| c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))).collect());
        let fs: Vec<Vec<FiniteSetH>> = (0..fibers).map(|_| vec![set(&mut rng, 3), set(&mut rng, 1)]).collect();
        let part = delta_fine_partition(&fs, delta).unwrap();
        let mut seen = vec![false; fibers];
        for cell in &part.cells {
            for &x in cell {
                prop_assert!(!seen[x]);
                seen[x] = true;
                for &y in cell {
                    for l in 0..2 {
                        prop_assert!(hausdorff(&fs[x][l], &fs[y][l]).unwrap() < delta);
                    }
                }
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn removed_regions_are_nested(seed in any::<u64>(), d in 60.0f64..120.0, eps in 0.005f64..0.05) {
        let a = a_sequence(d, 3).unwrap().a;
        let geo = generate_geometry(&TowerParams::new(a, vec![eps; 3], seed)).unwrap();
        let r = nested_refinement(&geo).unwrap().report;
        prop_assert!(r.nesting.iter().all(|row| row.passed), "{:?}", r.nesting);
        prop_assert!(r.masses_monotone && r.containment_ok);
        prop_assert!(r.coverage.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn ledger_ratio_peaks_then_decreases(b in 2.0f64..30.0, d in 10.0f64..1000.0, eps in 0.25f64..1.0) {
        // ratio ~ D² ln^{1-ε} m / m^ε up to slower factors, so the peak moves out like e^{O(1/ε)}
        let l = growth_ledger(&LedgerParams { b, d, eps, m_max: 1_000_000, grid: LedgerGrid::Geometric { per_decade: 10 } }).unwrap();
        prop_assert!(l.rows.iter().all(|r| r.ratio.is_finite() && r.log_mb.is_finite()));
        let ratios: Vec<f64> = l.rows.iter().map(|r| r.ratio).collect();
        let peak = (0..ratios.len()).max_by(|&i, &j| ratios[i].total_cmp(&ratios[j])).unwrap();
        prop_assert!(l.rows[peak].m < 100_000, "peak at m = {}", l.rows[peak].m);
        prop_assert!(ratios[peak..].windows(2).all(|w| w[1] < w[0]));
    }
}
