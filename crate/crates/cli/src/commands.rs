use std::f64::consts::LN_2;
use std::io::Write;
use std::path::Path;

use holoweld::construct::{growth_ledger, run_pipeline, ConstructError, LedgerGrid, LedgerParams, PipelineConfig};
use holoweld::eglue::{weld, AnalyticPatchSet, GlueParams};
use holoweld::fields::{heatmap_pgm, raster_pgm, write_container, write_csv, ComplexField, Grid, RasterSet, RealField, Square};
use holoweld::shglue::{bounding_domain, glue_subharmonic, GlueError, ShGlueParams};
use holoweld::tower::{a_sequence, four_corner_check, generate_geometry, nested_refinement, refinement_csv, TowerError, TowerParams};
use holoweld::windows::{check_all, random_configuration, Configuration, WindowError, WindowSystem};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{GlueConfig, GlueKind, GridKind, LedgerConfig, TowersConfig, WindowsConfig};
use crate::output::Artifacts;
use crate::CliError;

/// Whether every check of a command passed.
pub type Outcome = Result<bool, CliError>;

fn glue_error(e: GlueError) -> CliError {
    match e {
        GlueError::Hypothesis(_) | GlueError::Resolution(_) | GlueError::Window(_) => CliError::Config(e.to_string()),
        _ => CliError::Internal(e.to_string()),
    }
}

fn tower_error(e: TowerError) -> CliError {
    match e {
        TowerError::Input(_) | TowerError::TooLarge(_) => CliError::Config(e.to_string()),
        _ => CliError::Internal(e.to_string()),
    }
}

fn window_error(e: WindowError) -> CliError {
    CliError::Config(e.to_string())
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

/// `random:N` draws on `S_extent`; `file:path` reads a JSON list of `[x, y]`.
fn points(spec: &str, c: f64, h: f64, extent: Option<f64>, rng: &mut ChaCha8Rng) -> Result<Configuration, CliError> {
    if let Some(n) = spec.strip_prefix("random:") {
        let n: usize = n.parse().map_err(|_| CliError::Config(format!("bad point count in `{spec}`")))?;
        let extent = extent.unwrap_or(1.0 + 2.0 * (n as f64).sqrt());
        let cfg = random_configuration(rng, n, extent, c, h, 2.0).map_err(window_error)?;
        if cfg.len() < n {
            log::warn!("only {} of {n} separated points fit in S_{extent}", cfg.len());
        }
        Ok(cfg)
    } else if let Some(path) = spec.strip_prefix("file:") {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let pairs: Vec<[f64; 2]> = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::Config(format!("{path}: {}", crate::config::located(e.inner(), e.path()))))?;
        let pts = pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect();
        Configuration::new(pts, None, c).and_then(|cfg| cfg.snapped(h)).map_err(window_error)
    } else {
        Err(CliError::Config(format!("points must be `random:N` or `file:path`, got `{spec}`")))
    }
}

fn image_grid(sq: Square, size: usize) -> Result<Grid, CliError> {
    Grid::new(sq, size.max(3)).map_err(internal)
}

/// Nearest-node resampling of a raster union onto an image grid.
fn union_on(sets: &[RasterSet], image: Grid) -> RasterSet {
    RasterSet::from_fn(image, |z| {
        sets.iter().any(|s| match s.grid().nearest(z) {
            Some((i, j)) => s.get(i, j) && (s.grid().node(i, j) - z).norm() <= s.grid().h(),
            None => false,
        })
    })
}

fn resample(f: &RealField, image: Grid) -> Result<RealField, CliError> {
    RealField::sample(image, |z| f.bilinear(z).unwrap_or(0.0)).map_err(internal)
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    command: &'a str,
    seed: u64,
    config: &'a C,
    passed: bool,
    report: R,
}

pub fn windows(cfg: &WindowsConfig, out: &mut Artifacts) -> Outcome {
    if !(cfg.c > 0.0) {
        return Err(CliError::Config(format!("C must be positive, got {}", cfg.c)));
    }
    let h = cfg.h.unwrap_or(1.0 / (8.0 * cfg.c));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let config = points(&cfg.points, cfg.c, h, cfg.extent, &mut rng)?;
    let ws = WindowSystem::build(&config, h).map_err(window_error)?;
    let rep = check_all(&ws).map_err(internal)?;
    out.json(None, &Envelope { command: "windows", seed: cfg.seed, config: cfg, passed: rep.passed, report: &rep })?;
    out.with_file(None, "csv", |w| {
        let mut csv = csv_writer(w);
        csv.write_record([
            "index", "x", "y", "p1_fraction", "p1_bound", "intruders", "contained", "p2_log_margin", "p3_min_excess",
            "submean_worst_excess", "passed",
        ])?;
        for k in 0..rep.points {
            let (p1, p2, p3, sh) = (&rep.p1[k], &rep.p2[k], &rep.p3[k], &rep.subharmonic[k]);
            let z = ws.windows()[k].lambda;
            let ok = p1.passed && p2.passed && p3.passed && sh.report.passed();
            csv.serialize((
                k, z.re, z.im, p1.fraction, p1.fraction_bound, p1.rectangles, p1.contained, p2.min_log_margin,
                p3.min_excess, sh.report.worst_excess, ok,
            ))?;
        }
        csv.flush()?;
        Ok(())
    })?;
    let image = image_grid(bounding_domain(&config, 0.5).map_err(internal)?, cfg.image_size)?;
    let v = ws.sample(&image).map_err(internal)?;
    out.with_file(Some("v"), "pgm", |w| Ok(heatmap_pgm(&v, w)?))?;
    let d: Vec<RasterSet> = ws.windows().iter().map(|w| w.d.clone()).collect();
    out.with_file(Some("d"), "pgm", |w| Ok(raster_pgm(&union_on(&d, image), w)?))?;
    Ok(rep.passed)
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

/// Random polynomial patches with `sup |p| <= 0.9 exp(2^{1-B} M)` on `S_1`.
fn random_patches(cfg: &GlueConfig, n: usize, h: f64, rng: &mut ChaCha8Rng) -> Result<Vec<ComplexField>, CliError> {
    let grid = Grid::on_lattice(Complex64::new(0.0, 0.0), 1.0, h).map_err(internal)?;
    let log_cap = 2f64.powf(1.0 - cfg.b) * cfg.m;
    (0..n)
        .map(|_| {
            let co: Vec<Complex64> =
                (0..=cfg.patch_degree).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let p = move |z: Complex64| co.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a);
            let raw = ComplexField::sample(grid, &p).map_err(internal)?;
            let sup = raw.sup_norm(None).map_err(internal)?.max(1e-300);
            let s = (0.9 * log_cap.exp() / sup).min(1.0);
            raw.map(|_, v| v * s).map_err(internal)
        })
        .collect()
}

pub fn glue(cfg: &GlueConfig, out: &mut Artifacts) -> Outcome {
    if !(cfg.c > 0.0 && cfg.m > 0.0 && cfg.b.is_finite()) {
        return Err(CliError::Config(format!("need C > 0, M > 0 and finite B, got {}, {}, {}", cfg.c, cfg.m, cfg.b)));
    }
    let h = cfg.h.unwrap_or(1.0 / (32.0 * cfg.c));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let config = points(&cfg.points, cfg.c, h, cfg.extent, &mut rng)?;
    let patches = random_patches(cfg, config.len(), h, &mut rng)?;
    let aps = AnalyticPatchSet::new(config.clone(), patches, cfg.m, cfg.b).map_err(glue_error)?;
    let (passed, field, u, e1) = match cfg.kind {
        GlueKind::Subharmonic => {
            let sp = aps.subharmonic_patches().map_err(glue_error)?;
            let domain = bounding_domain(&config, 1.0 / cfg.c + 4.0 * h).map_err(internal)?;
            let sh = glue_subharmonic(&sp, &ShGlueParams { h, domain: Some(domain), enforce_hypotheses: true }).map_err(glue_error)?;
            out.json(None, &Envelope { command: "glue", seed: cfg.seed, config: cfg, passed: sh.report.passed, report: &sh.report })?;
            (sh.report.passed, None, sh.u, None)
        }
        GlueKind::Entire => {
            let params = GlueParams { degree: cfg.degree, eps: cfg.eps, ..GlueParams::default() };
            let (sh, gr) = weld(&aps, Some(h), &params).map_err(glue_error)?;
            #[derive(Serialize)]
            struct Both<'a> {
                subharmonic: &'a holoweld::shglue::ShReport,
                entire: &'a holoweld::eglue::GlueReport,
            }
            let both = Both { subharmonic: &sh.report, entire: &gr.report };
            out.json(None, &Envelope { command: "glue", seed: cfg.seed, config: cfg, passed: gr.report.passed, report: &both })?;
            (gr.report.passed, Some(gr.f), sh.u, Some(gr.report.e1))
        }
    };
    if let Some(e1) = &e1 {
        out.with_file(None, "csv", |w| {
            let mut csv = csv_writer(w);
            csv.write_record(["index", "sup_inner", "threshold", "inner_contained", "bad_area", "area_bound", "passed"])?;
            for e in e1 {
                csv.serialize((e.index, e.sup_inner, e.threshold, e.inner_contained, e.bad_area, e.area_bound, e.passed))?;
            }
            csv.flush()?;
            Ok(())
        })?;
    }
    let image = image_grid(*u.grid().square(), cfg.image_size)?;
    out.with_file(Some("u"), "pgm", |w| Ok(heatmap_pgm(&resample(&u, image)?, w)?))?;
    out.with_file(Some("u"), "hwfd", |w| Ok(write_container(&u, w)?))?;
    if let Some(f) = field {
        let logf = f.map(|_, v| v.norm().ln_1p()).map_err(internal)?;
        out.with_file(Some("f"), "pgm", |w| Ok(heatmap_pgm(&resample(&logf, image)?, w)?))?;
        out.with_file(Some("f"), "hwfd", |w| Ok(write_container(&f, w)?))?;
    }
    Ok(passed)
}

pub fn towers(cfg: &TowersConfig, out: &mut Artifacts) -> Outcome {
    if !(cfg.eps > 0.0 && cfg.eps < 1.0) || cfg.levels < 2 {
        return Err(CliError::Config(format!("need levels >= 2 and eps in (0, 1), got {}, {}", cfg.levels, cfg.eps)));
    }
    let seq = a_sequence(cfg.d, cfg.levels).map_err(tower_error)?;
    let geo = generate_geometry(&TowerParams::new(seq.a.clone(), vec![cfg.eps; cfg.levels], cfg.seed)).map_err(tower_error)?;
    let towers = nested_refinement(&geo).map_err(tower_error)?;
    let corners = four_corner_check(&geo, cfg.corners, cfg.seed);
    let passed = towers.report.passed && corners.passed;
    #[derive(Serialize)]
    struct Report<'a> {
        a: &'a holoweld::tower::ASequence,
        refinement: &'a holoweld::tower::RefinementReport,
        corners: &'a holoweld::tower::CornerReport,
    }
    let rep = Report { a: &seq, refinement: &towers.report, corners: &corners };
    out.json(None, &Envelope { command: "towers", seed: cfg.seed, config: cfg, passed, report: &rep })?;
    let csv = refinement_csv(&towers.report).map_err(internal)?;
    out.text(None, "csv", &csv)?;
    Ok(passed)
}

fn construct_error(e: ConstructError) -> CliError {
    match e {
        ConstructError::Input(_) => CliError::Config(e.to_string()),
        ConstructError::Tower(t) => tower_error(t),
        ConstructError::Glue { source: GlueError::Hypothesis(_), .. } => CliError::Config(e.to_string()),
        _ => CliError::Internal(e.to_string()),
    }
}

/// Samples per side of the exported `F_n^j` fields.
const FIELD_SIDE: usize = 257;

pub fn construct(cfg: &PipelineConfig, out: &mut Artifacts) -> Outcome {
    cfg.validate().map_err(construct_error)?;
    let run = run_pipeline(cfg).map_err(construct_error)?;
    let props = &run.properties;
    out.json(None, &Envelope { command: "construct", seed: cfg.seed, config: cfg, passed: props.passed, report: &run })?;
    out.json(Some("properties"), props)?;
    let seq = &run.sequence;
    let mut rows = Vec::new();
    for lv in &seq.levels {
        let sq = Square::centered(lv.a).map_err(internal)?;
        for (j, class) in lv.classes.iter().enumerate() {
            let log_max = class.f.log_max_on_square(&sq, FIELD_SIDE);
            let bound = (1.0 - seq.b) * LN_2 + props.log_mb.get(lv.n).copied().unwrap_or(f64::NAN);
            rows.push((lv.n, j, lv.a, class.mass, log_max, props.log_mb.get(lv.n - 1).copied(), bound));
            let grid = Grid::new(sq, FIELD_SIDE).map_err(internal)?;
            let f = ComplexField::sample(grid, |u| class.f.eval(u)).map_err(internal)?;
            let part = format!("F{}-{j}", lv.n);
            out.with_file(Some(&part), "hwfd", |w| Ok(write_container(&f, w)?))?;
            let logf = f.map(|_, v| v.norm().ln_1p()).map_err(internal)?;
            out.with_file(Some(&part), "pgm", |w| Ok(heatmap_pgm(&logf, w)?))?;
        }
    }
    out.with_file(Some("growth"), "csv", |w| {
        let mut csv = csv_writer(w);
        csv.write_record(["n", "class", "a_n", "mass", "log_max_F", "log_M_B_n", "log_bound_next"])?;
        for r in &rows {
            csv.serialize(r)?;
        }
        csv.flush()?;
        Ok(())
    })?;
    Ok(props.passed)
}

pub fn ledger(cfg: &LedgerConfig, out: &mut Artifacts) -> Outcome {
    if !(cfg.mmax >= 3.0 && cfg.mmax.fract() == 0.0 && cfg.mmax <= u64::MAX as f64) {
        return Err(CliError::Config(format!("mmax must be an integer >= 3, got {}", cfg.mmax)));
    }
    let grid = match cfg.grid {
        GridKind::Linear => LedgerGrid::Linear,
        GridKind::Geometric => LedgerGrid::Geometric { per_decade: cfg.per_decade },
    };
    let p = LedgerParams { b: cfg.b, d: cfg.d, eps: cfg.eps, m_max: cfg.mmax as u64, grid };
    let l = growth_ledger(&p).map_err(|e| CliError::Config(e.to_string()))?;
    let finite = l.rows.iter().all(|r| r.log_mb.is_finite() && r.ratio.is_finite() && r.log_logmax.is_finite());
    let tail_from = 1000.min(p.m_max / 10).max(3);
    let decreasing = l.ratio_decreasing_from(tail_from);
    let last_decade = (p.m_max / 10).max(2);
    #[derive(Serialize)]
    struct Summary<'a> {
        rows: usize,
        all_finite: bool,
        decreasing_from: u64,
        ratio_decreasing: bool,
        /// Spread of `ratio · (m^ε / ln^{1-ε} m)` over the final decade.
        normalized_spread_final_decade: f64,
        form_discrepancy: f64,
        first: &'a holoweld::construct::LedgerRow,
        last: &'a holoweld::construct::LedgerRow,
    }
    let s = Summary {
        rows: l.rows.len(),
        all_finite: finite,
        decreasing_from: tail_from,
        ratio_decreasing: decreasing,
        normalized_spread_final_decade: l.normalized_spread_from(last_decade),
        form_discrepancy: l.form_discrepancy,
        first: &l.rows[0],
        last: l.rows.last().expect("ledger has rows"),
    };
    let passed = finite && decreasing;
    out.json(None, &Envelope { command: "ledger", seed: cfg.seed, config: cfg, passed, report: &s })?;
    out.text(None, "csv", &l.to_csv().map_err(internal)?)?;
    out.with_file(Some("curve"), "csv", |w| {
        let mut csv = csv_writer(w);
        csv.write_record(["m", "log_R", "log_log_max_F", "log_log_bound", "ratio"])?;
        for r in &l.rows {
            // the bound log^{3+ε} R in log form
            csv.serialize((r.m, r.log_a, r.log_logmax, (3.0 + cfg.eps) * r.log_a.ln(), r.ratio))?;
        }
        csv.flush()?;
        Ok(())
    })?;
    Ok(passed)
}

/// Writes a field of the named kind from a container file back out as CSV.
pub fn export_csv(input: &Path, complex: bool, out: &Path) -> Result<(), CliError> {
    let file = std::fs::File::open(input).map_err(|e| CliError::Config(format!("{}: {e}", input.display())))?;
    let r = std::io::BufReader::new(file);
    let w = std::io::BufWriter::new(std::fs::File::create(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?);
    let res = if complex {
        holoweld::fields::read_container::<Complex64, _>(r).map(|f| write_csv(&f, w))
    } else {
        holoweld::fields::read_container::<f64, _>(r).map(|f| write_csv(&f, w))
    };
    match res {
        Ok(Ok(())) => Ok(()),
        Ok(Err(e)) => Err(CliError::Io(e.to_string())),
        Err(e) => Err(CliError::Config(format!("{}: {e}", input.display()))),
    }
}
