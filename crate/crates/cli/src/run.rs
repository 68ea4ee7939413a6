use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use choquard::calculus::{fmt17, LatticeFunction};
use choquard::cayley::{growth_function, Ball, Group, GroupElement, GroupSpec};
use choquard::inequalities::{
    brezis_lieb_defect, check_hls_bilinear, check_main_inequality, check_second_order_sobolev, check_sobolev,
    geometric_perturbations, nonlocal_bump_cross_term, separating_bumps, BrezisLiebMode, Distribution,
    InequalityReport, RandomFunctionSpec,
};
use choquard::kernel::krylov::green_column;
use choquard::kernel::lattice::lattice_riesz;
use choquard::kernel::{
    asymptotic_exponent, cache, fit_profile, riesz_kernel_with, spectral_decompose, ExponentFit, KernelMethod,
    QuadratureSpec, RieszKernel, SpectralData, DEFAULT_DENSE_CAP,
};
use choquard::solver::{build_system, maximize, solve_equivalent_form, sweep, Family, Problem, SweepGrid};
use choquard::{Error, Result};

use crate::config::{Command, RunConfig};
use crate::plot;

/// Files written by a run and a short machine-readable summary.
pub struct Outcome {
    pub artifacts: Vec<PathBuf>,
    pub seeds: Vec<u64>,
    pub summary: Value,
}

pub fn run(c: &RunConfig) -> Result<Outcome> {
    std::fs::create_dir_all(&c.out_dir)?;
    match c.command {
        Some(Command::Graph) => graph(c),
        Some(Command::Kernel) => kernel(c),
        Some(Command::Verify) => verify(c),
        Some(Command::Solve) => solve(c),
        Some(Command::Sweep) => run_sweep(c),
        Some(Command::Plot) => plot::emit(c),
        None => Err(Error::Invalid("no command given".into())),
    }
}

fn spec(c: &RunConfig) -> Result<GroupSpec> {
    c.group.parse()
}

fn method(c: &RunConfig) -> Result<KernelMethod> {
    match c.method.as_str() {
        "spectral" => Ok(KernelMethod::Spectral),
        "subordination" => Ok(KernelMethod::Subordination(QuadratureSpec::default())),
        other => Err(Error::Invalid(format!("unknown kernel method `{other}` (expected spectral or subordination)"))),
    }
}

fn write_json<T: Serialize>(path: PathBuf, value: &T, artifacts: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(&path, serde_json::to_string_pretty(value)?)?;
    artifacts.push(path);
    Ok(())
}

fn graph(c: &RunConfig) -> Result<Outcome> {
    let spec = spec(c)?;
    let ball = Ball::centered(spec, c.radius)?;
    let growth = growth_function(&Group::new(spec)?, c.radius)?;
    let mut artifacts = Vec::new();
    let path = c.out_dir.join(format!("graph_{}_r{}.json", spec.to_string().replace(':', ""), c.radius));
    let doc = json!({
        "truncation": ball.to_export(),
        "checksum": ball.checksum(),
        "growth": growth,
        "boundary": ball.boundary().len(),
    });
    write_json(path, &doc, &mut artifacts)?;
    Ok(Outcome {
        artifacts,
        seeds: vec![],
        summary: json!({ "vertices": ball.len(), "edges": ball.edges().len(), "checksum": ball.checksum() }),
    })
}

/// Dense kernel from the cache when present, otherwise built and cached.
fn dense_kernel(c: &RunConfig, spectral: &SpectralData, alpha: f64, artifacts: &mut Vec<PathBuf>) -> Result<RieszKernel> {
    let m = method(c)?;
    if let Some(dir) = &c.kernel_cache {
        if let Some(k) = cache::load(dir, spectral.domain(), alpha, m)? {
            return Ok(k);
        }
    }
    let k = riesz_kernel_with(spectral, alpha, m)?;
    if let Some(dir) = &c.kernel_cache {
        let (a, b) = cache::save(&k, dir)?;
        artifacts.extend([a, b]);
    }
    Ok(k)
}

/// Shell means `(d, mean, count)` of `values` by word distance.
pub fn shell_means(dist: &[u32], values: &[f64]) -> Vec<(u32, f64, usize)> {
    let mut acc: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for (&d, &v) in dist.iter().zip(values) {
        let e = acc.entry(d).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    acc.into_iter().map(|(d, (s, n))| (d, s / n as f64, n)).collect()
}

fn write_profile(path: PathBuf, dist: &[u32], values: &[f64], artifacts: &mut Vec<PathBuf>) -> Result<()> {
    let mut text = String::from("distance,mean,count\n");
    for (d, m, n) in shell_means(dist, values) {
        text.push_str(&format!("{d},{},{n}\n", fmt17(m)));
    }
    std::fs::write(&path, text)?;
    artifacts.push(path);
    Ok(())
}

#[derive(Serialize)]
struct KernelReport {
    group: String,
    radius: u32,
    vertices: usize,
    alpha: f64,
    /// How the profile was computed.
    route: String,
    expected_slope: f64,
    fit: Option<ExponentFit>,
    fit_error: Option<String>,
    cross_checks: BTreeMap<String, ExponentFit>,
}

fn kernel(c: &RunConfig) -> Result<Outcome> {
    let spec = spec(c)?;
    let ball = Ball::centered(spec, c.radius)?;
    let n = spec.homogeneous_dimension();
    let stem = format!("kernel_{}_r{}_a{}", spec.to_string().replace(':', ""), c.radius, c.alpha);
    let mut artifacts = Vec::new();
    let mut cross_checks = BTreeMap::new();
    let (route, fit) = if ball.len() <= DEFAULT_DENSE_CAP {
        let spectral = spectral_decompose(&ball)?;
        let k = dense_kernel(c, &spectral, c.alpha, &mut artifacts)?;
        if c.kernel_cache.is_none() {
            let (a, b) = cache::save(&k, &c.out_dir)?;
            artifacts.extend([a, b]);
        }
        write_profile(c.out_dir.join(format!("{stem}_profile.csv")), ball.distances(), k.matrix().col(0), &mut artifacts)?;
        (format!("dense-{}", k.method().label()), asymptotic_exponent(&k))
    } else {
        let GroupSpec::FreeAbelian(dim) = spec else {
            return Err(Error::Cap {
                what: "dense kernel vertices",
                needed: ball.len(),
                cap: DEFAULT_DENSE_CAP,
            });
        };
        let values = whole_lattice_profile(&ball, dim, c.alpha)?;
        write_profile(c.out_dir.join(format!("{stem}_profile.csv")), ball.distances(), &values, &mut artifacts)?;
        if c.alpha == 2.0 {
            let g = green_column(&ball, 0, 1e-12)?;
            let path = c.out_dir.join(format!("{stem}_dirichlet_profile.csv"));
            write_profile(path, ball.distances(), &g, &mut artifacts)?;
            cross_checks.insert("dirichlet-cg".to_string(), fit_profile(ball.distances(), &g, c.radius)?);
        }
        ("whole-lattice-subordination".to_string(), fit_profile(ball.distances(), &values, c.radius))
    };
    let (fit, fit_error) = match fit {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = KernelReport {
        group: spec.to_string(),
        radius: c.radius,
        vertices: ball.len(),
        alpha: c.alpha,
        route,
        expected_slope: c.alpha - n as f64,
        fit,
        fit_error,
        cross_checks,
    };
    write_json(c.out_dir.join(format!("{stem}_report.json")), &report, &mut artifacts)?;
    Ok(Outcome {
        artifacts,
        seeds: vec![],
        summary: json!({ "route": report.route, "slope": report.fit.as_ref().map(|f| f.slope), "expected_slope": report.expected_slope }),
    })
}

/// Whole-lattice `R_alpha(0, x)` at every vertex, one evaluation per orbit of
/// the coordinate symmetries.
pub fn whole_lattice_profile(ball: &Ball, dim: usize, alpha: f64) -> Result<Vec<f64>> {
    let key = |x: &GroupElement| {
        let mut k: Vec<i64> = x.coords().iter().map(|v| v.abs()).collect();
        k.sort_unstable();
        k
    };
    let mut orbits: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
    for x in ball.vertices() {
        let next = orbits.len();
        orbits.entry(key(x)).or_insert(next);
    }
    let mut points = vec![Vec::new(); orbits.len()];
    for (k, &i) in &orbits {
        points[i] = k.clone();
    }
    debug_assert!(points.iter().all(|p| p.len() == dim));
    let vals = lattice_riesz(dim, alpha, &points)?;
    Ok(ball.vertices().iter().map(|x| vals[orbits[&key(x)]]).collect())
}

fn distribution(c: &RunConfig) -> Result<Distribution> {
    let d = c.distribution.as_str();
    if d == "gaussian" {
        return Ok(Distribution::GaussianIid);
    }
    let bad = || Error::Invalid(format!("unknown distribution `{d}` (expected gaussian, spikes:K or bump:WIDTH)"));
    match d.split_once(':') {
        Some(("spikes", k)) => Ok(Distribution::SparseSpikes(k.parse().map_err(|_| bad())?)),
        Some(("bump", w)) => Ok(Distribution::SmoothedBump(w.parse().map_err(|_| bad())?)),
        _ => Err(bad()),
    }
}

const SUITES: [&str; 5] = ["sobolev", "hls", "main", "second-order", "brezis-lieb"];

fn verify(c: &RunConfig) -> Result<Outcome> {
    let suites: Vec<&str> = match c.suite.as_str() {
        "all" => SUITES.to_vec(),
        s if SUITES.contains(&s) => vec![s],
        s => return Err(Error::Invalid(format!("unknown suite `{s}` (expected one of {} or all)", SUITES.join(", ")))),
    };
    let spec = spec(c)?;
    let ball = Ball::centered(spec, c.radius)?;
    let n = spec.homogeneous_dimension() as f64;
    let rf = RandomFunctionSpec {
        distribution: distribution(c)?,
        support_radius: c.support_radius.unwrap_or(c.radius / 2),
        seed: c.seed,
    };
    let needs_kernel = suites.iter().any(|s| matches!(*s, "hls" | "main" | "brezis-lieb"));
    let mut artifacts = Vec::new();
    let kernel = if needs_kernel {
        let spectral = spectral_decompose(&ball)?;
        Some(Arc::new(dense_kernel(c, &spectral, c.alpha, &mut artifacts)?))
    } else {
        None
    };
    let mut summary = serde_json::Map::new();
    let mut failed = Vec::new();
    for suite in suites {
        let report: Value = match suite {
            "sobolev" => {
                let q = c.q.unwrap_or(2.0 * n / (n - 2.0));
                inequality(check_sobolev(&ball, &rf, 2.0, q, c.trials)?)
            }
            "hls" => {
                let r = 2.0 * n / (n + c.alpha);
                inequality(check_hls_bilinear(kernel.as_ref().unwrap(), &rf, r, r, c.trials)?)
            }
            "main" => inequality(check_main_inequality(kernel.as_ref().unwrap(), &rf, c.p, c.trials)?),
            "second-order" => {
                let p = c.second_order_p.unwrap_or(0.5 * (1.0 + n / 2.0));
                inequality(check_second_order_sobolev(&ball, &rf, p, c.trials)?)
            }
            _ => serde_json::to_value(brezis_lieb_suite(c, &ball, kernel.as_ref().unwrap())?)?,
        };
        if report["passed"] != Value::Bool(true) {
            failed.push(suite);
        }
        write_json(c.out_dir.join(format!("verify_{suite}.json")), &report, &mut artifacts)?;
        summary.insert(suite.to_string(), report["passed"].clone());
    }
    if !failed.is_empty() {
        return Err(Error::Numerical(format!("verification failed for {}", failed.join(", "))));
    }
    Ok(Outcome { artifacts, seeds: vec![c.seed], summary: Value::Object(summary) })
}

fn inequality(r: InequalityReport) -> Value {
    let passed = r.passed();
    let mut v = serde_json::to_value(&r).expect("reports serialize");
    v["passed"] = Value::Bool(passed);
    v
}

#[derive(Serialize)]
struct ModeSummary {
    mode: String,
    /// Largest defect at the farthest bump, over trials.
    separating_max_defect: f64,
    /// Trials whose separating sequence left its envelope.
    separating_failures: usize,
    /// Trials whose shrinking sequence left its envelope.
    shrinking_failures: usize,
    passed: bool,
}

#[derive(Serialize)]
struct BrezisLiebSummary {
    trials: usize,
    p: f64,
    support_radius: u32,
    bump_distances: Vec<u32>,
    shrinking_terms: usize,
    envelopes: Vec<String>,
    modes: Vec<ModeSummary>,
    passed: bool,
}

const SHRINKING_TERMS: usize = 20;

/// Separating unit bumps along the first generator and shrinking
/// perturbations `u + 2^-n w`, for each splitting functional.
fn brezis_lieb_suite(c: &RunConfig, ball: &Arc<Ball>, kernel: &Arc<RieszKernel>) -> Result<BrezisLiebSummary> {
    let support = c.support_radius.unwrap_or(c.radius / 4);
    let rf = RandomFunctionSpec { distribution: distribution(c)?, support_radius: support, seed: c.seed };
    let group = ball.group();
    let step = group.generators()[0].clone();
    let mut sites = Vec::new();
    let mut x = group.identity();
    for k in 1..=c.radius {
        x = group.multiply(&x, &step);
        if k >= support + 3 {
            if let Some(i) = ball.index_of(&x) {
                sites.push(i);
            }
        }
    }
    if sites.is_empty() {
        return Err(Error::Invalid(format!("radius {} leaves no room for bumps beyond support {support}", c.radius)));
    }
    let p = c.p;
    let modes = [
        BrezisLiebMode::GradientP(p),
        BrezisLiebMode::LaplacianP(p),
        BrezisLiebMode::Nonlocal(p, Arc::clone(kernel)),
    ];
    let mut summaries = Vec::new();
    for mode in &modes {
        let mut worst: f64 = 0.0;
        let mut sep_fail = 0;
        let mut shrink_fail = 0;
        for t in 0..c.trials as u64 {
            let u = LatticeFunction::new(Arc::clone(ball), rf.sample(ball, t, 0)?)?;
            let w = LatticeFunction::new(Arc::clone(ball), rf.sample(ball, t, 1)?)?;
            let seq = separating_bumps(&u, &sites)?;
            let d = brezis_lieb_defect(&seq, &u, mode, None)?;
            // rounding floor of A(u_n) - A(u_n - u) - A(u) at this scale
            let a_u = mode.evaluate(&u, None);
            let floor = |un: &LatticeFunction| 64.0 * f64::EPSILON * (mode.evaluate(un, None) + a_u + 1.0);
            let last = *d.last().unwrap();
            worst = worst.max(last);
            let ok = match mode {
                BrezisLiebMode::Nonlocal(..) => d.iter().zip(&sites).zip(&seq).all(|((&defect, &site), un)| {
                    let cross = nonlocal_bump_cross_term(kernel, u.values(), p, site);
                    (defect - cross).abs() <= 1e-9 * cross + floor(un)
                }),
                _ => last <= 1e-10 * (mode.evaluate(seq.last().unwrap(), None) + a_u).max(1.0),
            };
            if !ok {
                sep_fail += 1;
            }
            let shrink = brezis_lieb_defect(&geometric_perturbations(&u, &w, SHRINKING_TERMS)?, &u, mode, None)?;
            if !shrinking_ok(&shrink) {
                shrink_fail += 1;
            }
        }
        summaries.push(ModeSummary {
            mode: mode.label().to_string(),
            separating_max_defect: worst,
            separating_failures: sep_fail,
            shrinking_failures: shrink_fail,
            passed: sep_fail == 0 && shrink_fail == 0,
        });
    }
    Ok(BrezisLiebSummary {
        trials: c.trials,
        p,
        support_radius: support,
        bump_distances: sites.iter().map(|&i| ball.distance(i)).collect(),
        shrinking_terms: SHRINKING_TERMS,
        envelopes: vec![
            "local modes: defect at the farthest bump <= 1e-10 * max(A(u_n) + A(u), 1)".into(),
            "nonlocal mode: defect equals the cross term 2 (R * |u|^p)(site) to 1e-9 relative, plus a 64 eps rounding floor".into(),
            "shrinking u + 2^-n w: last 5 defects nonincreasing".into(),
        ],
        passed: summaries.iter().all(|m| m.passed),
        modes: summaries,
    })
}

/// Defects of a shrinking sequence decrease over the last five terms.
pub fn shrinking_ok(d: &[f64]) -> bool {
    d[d.len().saturating_sub(5)..].windows(2).all(|w| w[1] <= w[0])
}

fn solve(c: &RunConfig) -> Result<Outcome> {
    let spec = spec(c)?;
    let family: Family = c.family.parse()?;
    let cfg = c.solve_config()?;
    let n = spec.homogeneous_dimension();
    let adm = family.admissibility(n, c.alpha, c.p);
    if !adm.in_theorem && !c.allow_out_of_theorem {
        return Err(Error::Invalid(format!(
            "{family} with alpha = {}, p = {} is out of theorem ({}); pass --allow-out-of-theorem to run it anyway",
            c.alpha,
            c.p,
            adm.reasons.join("; ")
        )));
    }
    let ball = Ball::centered(spec, c.radius)?;
    let spectral = spectral_decompose(&ball)?;
    let mut artifacts = Vec::new();
    let kernel = Arc::new(dense_kernel(c, &spectral, c.alpha, &mut artifacts)?);
    let problem = Problem::labeled(family, kernel, c.p)?;
    let result = if c.equivalent { solve_equivalent_form(&problem, &cfg)? } else { maximize(&problem, &cfg)? };
    artifacts.extend(result.save(&c.out_dir, "solve")?);
    let mut summary = json!({
        "status": result.status,
        "k_hat": result.k_hat,
        "lambda": result.lambda,
        "residual": result.residual,
        "label": result.label,
        "iterations": result.iterations,
    });
    if family == Family::FirstOrder && !c.equivalent {
        let sys = build_system(&problem, &spectral, &result.u_solution)?;
        write_json(c.out_dir.join("solve_system.json"), &sys.summary(), &mut artifacts)?;
        summary["system"] = serde_json::to_value(sys.summary())?;
    }
    Ok(Outcome { artifacts, seeds: vec![c.seed], summary })
}

fn run_sweep(c: &RunConfig) -> Result<Outcome> {
    let spec = spec(c)?;
    let family: Family = c.family.parse()?;
    let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
    let grid = SweepGrid {
        family,
        group: spec,
        p_values: or(&c.p_values, c.p),
        alpha_values: or(&c.alpha_values, c.alpha),
        radii: if c.radii.is_empty() { vec![c.radius] } else { c.radii.clone() },
    };
    let n = spec.homogeneous_dimension();
    let outside: Vec<String> = grid
        .p_values
        .iter()
        .flat_map(|&p| grid.alpha_values.iter().map(move |&a| (p, a)))
        .filter(|&(p, a)| !family.admissibility(n, a, p).in_theorem)
        .map(|(p, a)| format!("(p = {p}, alpha = {a})"))
        .collect();
    if !outside.is_empty() && !c.allow_out_of_theorem {
        return Err(Error::Invalid(format!(
            "grid points {} are out of theorem; pass --allow-out-of-theorem to sweep them with a label",
            outside.join(", ")
        )));
    }
    let result = sweep(&grid, &c.solve_config()?)?;
    let artifacts = result.save(&c.out_dir, "sweep")?;
    let failed = result.rows.iter().filter(|r| r.error.is_some()).count();
    Ok(Outcome {
        artifacts,
        seeds: vec![c.seed],
        summary: json!({ "rows": result.rows.len(), "failed_rows": failed }),
    })
}

pub fn relative(path: &Path, base: &Path) -> String {
    path.strip_prefix(base).unwrap_or(path).display().to_string()
}
