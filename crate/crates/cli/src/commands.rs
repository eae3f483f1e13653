//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;

use conformal_lab::beltrami::{
    beltrami_residual, ellipticity_sample, fit_polynomial_phi, KConvention, LevelCurve,
};
use conformal_lab::boundary::{BoundaryInfo, CircleHomeo};
use conformal_lab::distortion::duality_diagnostics;
use conformal_lab::hopf::hopf_field;
use conformal_lab::mesh::{build_disk_mesh, read_map, DiscreteMap, DiskMesh};
use conformal_lab::minimize::{minimize, uniqueness_probe, Init, MinimizeConfig, MinimizeResult};
use conformal_lab::oracle::{oracle_map, OracleKind};
use conformal_lab::profile::{power_profile, validate_profile, EnergyProfile};
use conformal_lab::report::{
    write_curve_csv, write_history_csv, write_hopf_csv, write_json, DiagnoseEntry,
    MinimizeResultJson, RunDir, RunManifest,
};
use conformal_lab::variation::{
    inner_variation_derivative_with_step, random_test_field, weak_form_15_residual,
    weak_form_18_residual,
};
use conformal_lab::{Error, Result};

use crate::config::ConfigFile;

pub fn mesh(cfg: &ConfigFile, level: Option<u32>, out: &Path, threads: usize) -> Result<()> {
    let t0 = Instant::now();
    let level = cfg.resolve(level, "level", 4u32);
    let mesh = build_disk_mesh(level)?;
    let mut params = BTreeMap::new();
    params.insert("level".into(), level.to_string());
    let mut manifest = RunManifest::new("mesh", params, 0, threads);
    let dir = RunDir::create(out, &manifest)?;
    mesh.write_to(&dir.file("mesh.txt"))?;
    manifest.add_artifact("mesh.txt");
    manifest.wall_clock_secs = t0.elapsed().as_secs_f64();
    dir.write_manifest(&manifest)
}

pub struct MinimizeArgs {
    pub p: Option<f64>,
    pub level: Option<u32>,
    pub boundary: Option<String>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    pub jac_floor: Option<f64>,
}

struct ResolvedMinimize {
    p: f64,
    level: u32,
    boundary: String,
    tol: f64,
    max_iter: usize,
    restarts: usize,
    seed: u64,
    jac_floor: f64,
}

fn resolve_minimize(cfg: &ConfigFile, args: MinimizeArgs) -> ResolvedMinimize {
    ResolvedMinimize {
        p: cfg.resolve(args.p, "p", 2.0),
        level: cfg.resolve(args.level, "level", 4),
        boundary: cfg.resolve(args.boundary, "boundary", "id".to_string()),
        tol: cfg.resolve(args.tol, "tol", 1e-8),
        max_iter: cfg.resolve(args.max_iter, "max-iter", 20_000),
        restarts: cfg.resolve(args.restarts, "restarts", 1),
        seed: cfg.resolve(args.seed, "seed", 0),
        jac_floor: cfg.resolve(args.jac_floor, "jac-floor", 1e-3),
    }
}

fn minimize_params(r: &ResolvedMinimize) -> BTreeMap<String, String> {
    let mut params = BTreeMap::new();
    params.insert("p".into(), r.p.to_string());
    params.insert("level".into(), r.level.to_string());
    params.insert("boundary".into(), r.boundary.clone());
    params.insert("tol".into(), r.tol.to_string());
    params.insert("max-iter".into(), r.max_iter.to_string());
    params.insert("restarts".into(), r.restarts.to_string());
    params.insert("jac-floor".into(), r.jac_floor.to_string());
    params
}

fn validated_profile(p: f64) -> Result<EnergyProfile> {
    let profile = power_profile(p)?;
    let report = validate_profile(&profile, 100.0)?;
    if !report.all_pass {
        return Err(Error::Domain(format!("profile p={p} failed validation")));
    }
    Ok(profile)
}

pub fn minimize_cmd(
    cfg: &ConfigFile,
    args: MinimizeArgs,
    out: &Path,
    threads: usize,
) -> Result<()> {
    let t0 = Instant::now();
    let r = resolve_minimize(cfg, args);
    let profile = validated_profile(r.p)?;
    let h0 = CircleHomeo::parse(&r.boundary)?;
    let mesh = build_disk_mesh(r.level)?;
    let mut mcfg = MinimizeConfig::new(profile);
    mcfg.grad_tol = r.tol;
    mcfg.max_iters = r.max_iter;
    mcfg.jac_floor = r.jac_floor;
    mcfg.seed = r.seed;

    let mut manifest = RunManifest::new("minimize", minimize_params(&r), r.seed, threads);
    let dir = RunDir::create(out, &manifest)?;

    let (result, probe) = if r.restarts >= 2 {
        let (report, mut results) = uniqueness_probe(&mesh, &h0, &mcfg, r.restarts, r.seed)?;
        (results.remove(0), Some(report))
    } else {
        (minimize(&mesh, &h0, &mcfg, Init::Harmonic)?, None)
    };

    result.map.write_to(&dir.file("map.txt"))?;
    manifest.add_artifact("map.txt");
    write_json(
        &dir.file("result.json"),
        &MinimizeResultJson::from_result(&result, r.p, r.level, &r.boundary, "harmonic"),
    )?;
    manifest.add_artifact("result.json");
    write_history_csv(&dir.file("history.csv"), &result.history)?;
    manifest.add_artifact("history.csv");
    write_json(&dir.file("boundary.json"), &BoundaryInfo::of(&h0))?;
    manifest.add_artifact("boundary.json");
    if let Some(report) = probe {
        write_json(&dir.file("uniqueness.json"), &report)?;
        manifest.add_artifact("uniqueness.json");
    }
    manifest.wall_clock_secs = t0.elapsed().as_secs_f64();
    dir.write_manifest(&manifest)
}

pub struct DiagnoseArgs {
    pub tests: Option<String>,
    pub n_fields: Option<usize>,
    pub seed: Option<u64>,
    pub delta: Option<f64>,
    pub grad_bound: Option<f64>,
    pub k_convention: Option<String>,
    pub hopf_csv: bool,
}

#[derive(Serialize)]
struct DiagnoseReport {
    run: String,
    p: f64,
    level: u32,
    boundary: String,
    entries: Vec<DiagnoseEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    inner_richardson: Option<Vec<InnerEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hopf: Option<conformal_lab::hopf::HopfSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beltrami_self: Option<conformal_lab::beltrami::BeltramiResidualReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beltrami_cross: Option<conformal_lab::beltrami::BeltramiResidualReport>,
}

#[derive(Serialize)]
struct InnerEntry {
    field_seed: u64,
    derivative: f64,
    derivative_half_step: f64,
}

/// Loads (mesh, map, p, level, boundary) from a run directory's manifest.
fn load_run(run: &Path) -> Result<(DiskMesh, DiscreteMap, f64, u32, String)> {
    let (dir, manifest) = RunDir::open(run)?;
    let get = |key: &str| -> Result<&String> {
        manifest
            .params
            .get(key)
            .ok_or_else(|| Error::Parse(format!("run manifest lacks {key:?}")))
    };
    let p: f64 = get("p")?.parse().map_err(|_| Error::Parse("bad p in manifest".into()))?;
    let level: u32 =
        get("level")?.parse().map_err(|_| Error::Parse("bad level in manifest".into()))?;
    let boundary = get("boundary")?.clone();
    let mesh = build_disk_mesh(level)?;
    let map = read_map(&dir.file("map.txt"), &mesh)?;
    Ok((mesh, map, p, level, boundary))
}

pub fn diagnose(cfg: &ConfigFile, run: &Path, args: DiagnoseArgs) -> Result<()> {
    let tests = cfg.resolve(args.tests, "tests", "inner,weak15,weak18,hopf,beltrami".to_string());
    let n_fields = cfg.resolve(args.n_fields, "n-fields", 10);
    let seed = cfg.resolve(args.seed, "seed", 11);
    let delta = cfg.resolve(args.delta, "delta", 0.15);
    let grad_bound = cfg.resolve(args.grad_bound, "grad-bound", 0.45);
    let convention = KConvention::parse(&cfg.resolve(args.k_convention, "k-convention", "scaled".to_string()))?;
    let wanted: Vec<&str> = tests.split(',').map(|s| s.trim()).collect();
    for t in &wanted {
        if !matches!(*t, "inner" | "weak15" | "weak18" | "hopf" | "beltrami") {
            return Err(Error::Parse(format!("unknown diagnostic {t:?}")));
        }
    }

    let (mesh, map, p, level, boundary) = load_run(run)?;
    let profile = validated_profile(p)?;
    let fields: Vec<_> = (0..n_fields as u64)
        .map(|i| {
            random_test_field(&mesh, conformal_lab::seeding::substream_u64(seed, "field", i), delta, grad_bound)
                .map(|f| (conformal_lab::seeding::substream_u64(seed, "field", i), f))
        })
        .collect::<Result<_>>()?;

    let mut entries = Vec::new();
    let mut inner_richardson = None;
    if wanted.contains(&"inner") {
        let mut rich = Vec::new();
        for (fseed, phi) in &fields {
            let d = inner_variation_derivative_with_step(&mesh, &map, &profile, phi, 1e-4)?;
            let d2 = inner_variation_derivative_with_step(&mesh, &map, &profile, phi, 5e-5)?;
            entries.push(DiagnoseEntry { test: "inner".into(), field_seed: *fseed, residual: d.abs() });
            rich.push(InnerEntry { field_seed: *fseed, derivative: d, derivative_half_step: d2 });
        }
        inner_richardson = Some(rich);
    }
    if wanted.contains(&"weak15") {
        let inverse = conformal_lab::distortion::resample_inverse(&mesh, &map)?;
        for (fseed, phi) in &fields {
            let r = weak_form_15_residual(&mesh, &inverse, &profile, phi)?;
            entries.push(DiagnoseEntry { test: "weak15".into(), field_seed: *fseed, residual: r });
        }
    }
    if wanted.contains(&"weak18") {
        for (fseed, phi) in &fields {
            let r = weak_form_18_residual(&mesh, &map, p, phi)?;
            entries.push(DiagnoseEntry { test: "weak18".into(), field_seed: *fseed, residual: r });
        }
    }
    let mut hopf_summary = None;
    let mut beltrami_self = None;
    let mut beltrami_cross = None;
    if wanted.contains(&"hopf") || wanted.contains(&"beltrami") {
        let hopf = hopf_field(&mesh, &map, &profile)?;
        if wanted.contains(&"hopf") {
            if args.hopf_csv {
                let (dir, _) = RunDir::open(run)?;
                write_hopf_csv(&dir.file("hopf.csv"), &hopf)?;
            }
            hopf_summary = Some(hopf.summary.clone());
        }
        if wanted.contains(&"beltrami") {
            beltrami_self = Some(beltrami_residual(&mesh, &map, &hopf.phi, p, convention)?);
            let coeffs = fit_polynomial_phi(&mesh, &hopf, 6)?;
            let fitted: Vec<Complex64> = hopf
                .barycenters
                .iter()
                .map(|&b| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    let mut pw = Complex64::new(1.0, 0.0);
                    for &c in &coeffs {
                        acc += c * pw;
                        pw *= b;
                    }
                    acc
                })
                .collect();
            beltrami_cross = Some(beltrami_residual(&mesh, &map, &fitted, p, convention)?);
        }
    }

    let report = DiagnoseReport {
        run: run.display().to_string(),
        p,
        level,
        boundary,
        entries,
        inner_richardson,
        hopf: hopf_summary,
        beltrami_self,
        beltrami_cross,
    };
    let (dir, mut manifest) = RunDir::open(run)?;
    write_json(&dir.file("diagnose.json"), &report)?;
    manifest.add_artifact("diagnose.json");
    if args.hopf_csv {
        manifest.add_artifact("hopf.csv");
    }
    dir.write_manifest(&manifest)
}

pub fn levelcurve(
    cfg: &ConfigFile,
    p: Option<f64>,
    k: Option<f64>,
    x_min: Option<f64>,
    x_max: Option<f64>,
    n: Option<usize>,
    out: &Path,
) -> Result<()> {
    let p = cfg.resolve(p, "p", 2.0);
    let k = cfg.resolve(k, "k", 10.0);
    let x_min = cfg.resolve(x_min, "x-min", 3.5);
    let x_max = cfg.resolve(x_max, "x-max", 12.0);
    let n = cfg.resolve(n, "n", 400);
    let curve = LevelCurve::new(p, k)?;
    let samples = curve.sample(x_min, x_max, n)?;
    write_curve_csv(out, &samples)
}

pub fn ellipticity(
    cfg: &ConfigFile,
    p: Option<f64>,
    n: Option<usize>,
    seed: Option<u64>,
    out: &Path,
) -> Result<()> {
    let p = cfg.resolve(p, "p", 2.0);
    let n = cfg.resolve(n, "n", 1_000_000);
    let seed = cfg.resolve(seed, "seed", 42);
    let report = ellipticity_sample(p, n, seed)?;
    write_json(out, &report)
}

fn parse_complex_flag(s: &str) -> Result<Complex64> {
    // Reuse the boundary parser's complex syntax through a mobius spec.
    match CircleHomeo::parse(&format!("mobius:a={s}"))? {
        CircleHomeo::Mobius { a, .. } => Ok(a),
        _ => Err(Error::Parse(format!("bad complex literal {s:?}"))),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn oracle(
    cfg: &ConfigFile,
    kind: &str,
    boundary: Option<String>,
    level: Option<u32>,
    n_quad: Option<usize>,
    a: Option<String>,
    alpha: Option<f64>,
    out: &Path,
) -> Result<()> {
    let level = cfg.resolve(level, "level", 4);
    let boundary = cfg.resolve(boundary, "boundary", "id".to_string());
    let n_quad = cfg.resolve(n_quad, "n-quad", 4096);
    let alpha = cfg.resolve(alpha, "alpha", 0.0);
    let mesh = build_disk_mesh(level)?;
    let h0 = CircleHomeo::parse(&boundary)?;
    let kind = match kind {
        "fem" => OracleKind::HarmonicFem,
        "poisson" => OracleKind::PoissonQuadrature { n_quad },
        "rotation" => OracleKind::Rotation { alpha },
        "mobius" => {
            let a = parse_complex_flag(a.as_deref().unwrap_or("0"))?;
            OracleKind::Mobius { a, alpha }
        }
        "linear" => {
            let c = parse_complex_flag(a.as_deref().unwrap_or("0"))?;
            OracleKind::Linear { b: Complex64::new(1.0, 0.0), c }
        }
        other => return Err(Error::Parse(format!("unknown oracle kind {other:?}"))),
    };
    let map = oracle_map(&mesh, &kind, Some(&h0))?;
    map.write_to(out)
}

pub fn duality(
    cfg: &ConfigFile,
    run: Option<PathBuf>,
    map_file: Option<PathBuf>,
    p: Option<f64>,
    level: Option<u32>,
) -> Result<()> {
    let (mesh, map, p, run_dir) = match (run, map_file) {
        (Some(run), None) => {
            let (mesh, map, p, _, _) = load_run(&run)?;
            (mesh, map, p, Some(run))
        }
        (None, Some(path)) => {
            let p = cfg.resolve(p, "p", 2.0);
            let level = cfg.resolve(level, "level", 4);
            let mesh = build_disk_mesh(level)?;
            let map = read_map(&path, &mesh)?;
            (mesh, map, p, None)
        }
        _ => {
            return Err(Error::Parse(
                "duality needs exactly one of --run DIR or --map FILE (with --p/--level)".into(),
            ))
        }
    };
    let profile = validated_profile(p)?;
    let diag = duality_diagnostics(&mesh, &map, &profile)?;
    match run_dir {
        Some(run) => {
            let (dir, mut manifest) = RunDir::open(&run)?;
            write_json(&dir.file("duality.json"), &diag)?;
            manifest.add_artifact("duality.json");
            dir.write_manifest(&manifest)?;
        }
        None => {
            println!("{}", serde_json::to_string_pretty(&diag)?);
        }
    }
    Ok(())
}

pub struct AllArgs {
    pub p: Option<f64>,
    pub boundary: Option<String>,
    pub levels: Option<String>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct AllLevelSummary {
    level: u32,
    energy: f64,
    iterations: usize,
    converged: bool,
    min_j: f64,
    hopf_l1: f64,
    hopf_l2: f64,
    hopf_max: f64,
    duality_gap: f64,
    inner_max_abs: f64,
    weak15_max: f64,
    weak18_max: f64,
}

#[derive(Serialize)]
struct AllSummary {
    p: f64,
    boundary: String,
    seed: u64,
    levels: Vec<AllLevelSummary>,
}

pub fn all_pipeline(cfg: &ConfigFile, args: AllArgs, out: &Path, threads: usize) -> Result<()> {
    let t0 = Instant::now();
    let p = cfg.resolve(args.p, "p", 2.0);
    let boundary = cfg.resolve(args.boundary, "boundary", "id".to_string());
    let levels_spec = cfg.resolve(args.levels, "levels", "5".to_string());
    let tol = cfg.resolve(args.tol, "tol", 1e-8);
    let max_iter = cfg.resolve(args.max_iter, "max-iter", 60_000);
    let seed = cfg.resolve(args.seed, "seed", 7);
    let levels: Vec<u32> = levels_spec
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| Error::Parse(format!("bad level {s:?}"))))
        .collect::<Result<_>>()?;
    if levels.is_empty() {
        return Err(Error::Parse("all needs at least one level".into()));
    }

    let profile = validated_profile(p)?;
    let h0 = CircleHomeo::parse(&boundary)?;

    let mut params = BTreeMap::new();
    params.insert("p".into(), p.to_string());
    params.insert("boundary".into(), boundary.clone());
    params.insert("levels".into(), levels_spec.clone());
    params.insert("tol".into(), tol.to_string());
    params.insert("max-iter".into(), max_iter.to_string());
    let mut manifest = RunManifest::new("all", params, seed, threads);
    let dir = RunDir::create(out, &manifest)?;

    let mut summaries = Vec::new();
    for &level in &levels {
        let mesh = build_disk_mesh(level)?;
        let mut mcfg = MinimizeConfig::new(profile.clone());
        mcfg.grad_tol = tol;
        mcfg.max_iters = max_iter;
        mcfg.seed = seed;
        let res: MinimizeResult = minimize(&mesh, &h0, &mcfg, Init::Harmonic)?;
        let map_name = format!("map_level{level}.txt");
        res.map.write_to(&dir.file(&map_name))?;
        manifest.add_artifact(&map_name);
        let hist_name = format!("history_level{level}.csv");
        write_history_csv(&dir.file(&hist_name), &res.history)?;
        manifest.add_artifact(&hist_name);

        let hopf = hopf_field(&mesh, &res.map, &profile)?;
        let diag = duality_diagnostics(&mesh, &res.map, &profile)?;
        let inverse = conformal_lab::distortion::resample_inverse(&mesh, &res.map)?;
        let mut inner_max: f64 = 0.0;
        let mut w15: f64 = 0.0;
        let mut w18: f64 = 0.0;
        for i in 0..10u64 {
            let fseed = conformal_lab::seeding::substream_u64(seed, "field", i);
            let phi = random_test_field(&mesh, fseed, 0.15, 0.45)?;
            inner_max = inner_max
                .max(inner_variation_derivative_with_step(&mesh, &res.map, &profile, &phi, 1e-4)?.abs());
            w15 = w15.max(weak_form_15_residual(&mesh, &inverse, &profile, &phi)?);
            w18 = w18.max(weak_form_18_residual(&mesh, &res.map, p, &phi)?);
        }
        summaries.push(AllLevelSummary {
            level,
            energy: res.energy,
            iterations: res.iterations,
            converged: res.converged,
            min_j: res.min_j,
            hopf_l1: hopf.summary.l1_residual,
            hopf_l2: hopf.summary.l2_residual,
            hopf_max: hopf.summary.max_residual,
            duality_gap: diag.duality_gap,
            inner_max_abs: inner_max,
            weak15_max: w15,
            weak18_max: w18,
        });
    }
    write_json(&dir.file("summary.json"), &AllSummary { p, boundary, seed, levels: summaries })?;
    manifest.add_artifact("summary.json");
    manifest.wall_clock_secs = t0.elapsed().as_secs_f64();
    dir.write_manifest(&manifest)
}
