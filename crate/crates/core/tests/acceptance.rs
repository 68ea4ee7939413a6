//! Acceptance criteria, one line each. Runs as a plain binary so the lines
//! are printed by `cargo test`; exits nonzero if any criterion fails.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use choquard::calculus::{laplacian_vec, LatticeFunction};
use choquard::cayley::{Ball, GroupSpec};
use choquard::inequalities::{
    brezis_lieb_defect, check_hls_bilinear, check_main_inequality, check_second_order_sobolev, check_sobolev,
    geometric_perturbations, separating_bumps, BrezisLiebMode, Distribution, RandomFunctionSpec,
};
use choquard::kernel::krylov::{green_column, riesz_column};
use choquard::kernel::lattice::lattice_riesz;
use choquard::kernel::{
    fit_profile, fractional_laplacian_apply, riesz_kernel, spectral_decompose, KernelMethod, RieszKernel, SpectralData,
};
use choquard::solver::{
    build_system, constraint_energy, constraint_gradient, functional_gradient, functional_q, maximize, Family, Init,
    Problem, SolveConfig, SolveResult, Status,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Line {
    pass: bool,
    text: String,
}

impl Line {
    fn new() -> Self {
        Line { pass: true, text: String::new() }
    }

    /// Record one clause.
    fn check(&mut self, ok: bool, what: String) {
        if !self.text.is_empty() {
            self.text.push_str("; ");
        }
        self.text.push_str(&what);
        if !ok {
            self.text.push_str(" [FAIL]");
            self.pass = false;
        }
    }
}

fn z3(radius: u32) -> Arc<Ball> {
    Ball::centered(GroupSpec::FreeAbelian(3), radius).unwrap()
}

/// Shared desk-scale setup: Z^3, radius 12, alpha 1, p 5.
struct Desk {
    spectral: SpectralData,
    kernel: Arc<RieszKernel>,
    problem: Problem,
    result: SolveResult,
    solve_secs: f64,
}

impl Desk {
    fn new() -> Self {
        let spectral = spectral_decompose(&z3(12)).unwrap();
        let kernel = Arc::new(riesz_kernel(&spectral, 1.0).unwrap());
        let problem = Problem::new(Family::FirstOrder, Arc::clone(&kernel), 5.0).unwrap();
        let t = Instant::now();
        let result = maximize(&problem, &SolveConfig::default()).unwrap();
        Desk { spectral, kernel, problem, result, solve_secs: t.elapsed().as_secs_f64() }
    }
}

fn criterion_1(line: &mut Line) {
    let t = Instant::now();
    let b22 = z3(22);
    let dense_equiv = [
        (1.0, riesz_column(&b22, 1.0, 0, KernelMethod::Spectral, 1e-10, 2000).unwrap().values),
        (2.0, green_column(&b22, 0, 1e-12).unwrap()),
    ];
    for (alpha, col) in dense_equiv {
        let slope = fit_profile(b22.distances(), &col, 22).unwrap().slope;
        let want = alpha - 3.0;
        line.check((slope - want).abs() <= 0.2, format!("r22 truncated alpha {alpha}: slope {slope:.4} vs {want} +- 0.2"));
    }
    let b40 = z3(40);
    for alpha in [1.0, 2.0] {
        let points: Vec<Vec<i64>> = b40.vertices().iter().map(|x| x.coords().to_vec()).collect();
        let col = lattice_riesz(3, alpha, &points).unwrap();
        let slope = fit_profile(b40.distances(), &col, 40).unwrap().slope;
        let want = alpha - 3.0;
        line.check(
            (slope - want).abs() <= 0.15,
            format!("r40 whole-lattice subordination alpha {alpha}: slope {slope:.4} vs {want} +- 0.15"),
        );
    }
    let secs = t.elapsed().as_secs_f64();
    line.check(secs <= 600.0, format!("{secs:.0} s"));
}

fn criterion_2(line: &mut Line, desk: &Desk) {
    let k2 = riesz_kernel(&desk.spectral, 2.0).unwrap();
    let g12 = green_column(desk.spectral.domain(), 0, 1e-14).unwrap()[0];
    let rel = (k2.entry(0, 0) - g12).abs() / g12;
    line.check(rel <= 1e-8, format!("R_2(e,e) {:.12} vs Dirichlet solve {g12:.12}, rel {rel:.1e}", k2.entry(0, 0)));

    // G(R) = a + b / R + c / R^2 through three radii
    let rs = [20.0, 30.0, 40.0];
    let gs: Vec<f64> = rs.iter().map(|&r| green_column(&z3(r as u32), 0, 1e-13).unwrap()[0]).collect();
    let m: Vec<[f64; 3]> = rs.iter().map(|r| [1.0, 1.0 / r, 1.0 / (r * r)]).collect();
    let a = solve3(&m, &gs)[0];
    let target = 0.2527;
    line.check(
        (a - target).abs() <= 0.01 * target,
        format!("Richardson over R = 20, 30, 40: {a:.6} vs {target} +- 1%"),
    );
}

/// Cramer's rule for a 3x3 system.
fn solve3(m: &[[f64; 3]], b: &[f64]) -> [f64; 3] {
    let det = |a: &[[f64; 3]]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(m);
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut mk = [m[0], m[1], m[2]];
        for i in 0..3 {
            mk[i][k] = b[i];
        }
        *o = det(&mk) / d;
    }
    out
}

fn criterion_3(line: &mut Line, desk: &Desk) {
    let dom = desk.spectral.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for alpha in [0.5, 1.0, 1.5, 2.0] {
        let k = riesz_kernel(&desk.spectral, alpha).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let f: Vec<f64> = (0..dom.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let rf = LatticeFunction::new(Arc::clone(dom), k.apply(&f)).unwrap();
            let back = fractional_laplacian_apply(&desk.spectral, alpha, &rf).unwrap();
            let err = norm(&sub(back.values(), &f)) / norm(&f);
            worst = worst.max(err);
        }
        line.check(worst <= 1e-9, format!("alpha {alpha}: {worst:.1e}"));
    }
}

fn criterion_4(line: &mut Line, desk: &Desk) {
    let b15 = z3(15);
    let mut maxima: HashMap<&str, Vec<f64>> = HashMap::new();
    let mut violations = 0;
    for seed in 0..3 {
        let gauss15 = RandomFunctionSpec::gaussian(7, seed);
        let gauss12 = RandomFunctionSpec::gaussian(6, seed);
        let bump12 = RandomFunctionSpec { distribution: Distribution::SmoothedBump(2.0), ..gauss12 };
        let reports = [
            ("sobolev", check_sobolev(&b15, &gauss15, 2.0, 6.0, 1000).unwrap()),
            ("hls", check_hls_bilinear(&desk.kernel, &gauss12, 1.5, 1.5, 1000).unwrap()),
            ("main gaussian", check_main_inequality(&desk.kernel, &gauss12, 5.0, 1000).unwrap()),
            ("main", check_main_inequality(&desk.kernel, &bump12, 5.0, 1000).unwrap()),
            ("second-order", check_second_order_sobolev(&b15, &gauss15, 1.25, 1000).unwrap()),
        ];
        for (name, r) in reports {
            if !r.passed() {
                violations += 1;
            }
            maxima.entry(name).or_default().push(r.max_ratio);
        }
    }
    line.check(violations == 0, format!("{violations} failing reports over 15 x 1000 trials"));
    for name in ["sobolev", "hls", "main", "second-order", "main gaussian"] {
        let m = &maxima[name];
        let mean = m.iter().sum::<f64>() / 3.0;
        let spread = m.iter().map(|v| (v - mean).abs() / mean).fold(0.0, f64::max);
        let text = format!("{name} max ratio {mean:.4e} spread {:.1}%", 100.0 * spread);
        if name == "main gaussian" {
            // reported, not judged: the bump draws carry the lower bound
            line.check(true, text);
        } else {
            line.check(spread <= 0.05, text);
        }
    }
}

fn criterion_5(line: &mut Line, desk: &Desk) {
    let dom = desk.spectral.domain();
    let rf = RandomFunctionSpec::gaussian(3, 5);
    let sites: Vec<usize> = (6..=12).map(|k| dom.index_of(&choquard::cayley::GroupElement(vec![k, 0, 0])).unwrap()).collect();
    let modes = [
        BrezisLiebMode::GradientP(2.0),
        BrezisLiebMode::LaplacianP(2.0),
        BrezisLiebMode::Nonlocal(5.0, Arc::clone(&desk.kernel)),
    ];
    for mode in &modes {
        let mut worst: f64 = 0.0;
        let mut nonmonotone = 0;
        for t in 0..100 {
            let u = LatticeFunction::new(Arc::clone(dom), rf.sample(dom, t, 0).unwrap()).unwrap();
            let w = LatticeFunction::new(Arc::clone(dom), rf.sample(dom, t, 1).unwrap()).unwrap();
            let d = brezis_lieb_defect(&separating_bumps(&u, &sites).unwrap(), &u, mode, None).unwrap();
            worst = worst.max(*d.last().unwrap());
            let s = brezis_lieb_defect(&geometric_perturbations(&u, &w, 20).unwrap(), &u, mode, None).unwrap();
            if !s[15..].windows(2).all(|x| x[1] <= x[0]) {
                nonmonotone += 1;
            }
        }
        line.check(worst <= 1e-10, format!("{} separating max {worst:.1e}", mode.label()));
        line.check(nonmonotone == 0, format!("{} shrinking non-monotone tails {nonmonotone}/100", mode.label()));
    }
}

fn criterion_6(line: &mut Line) {
    let cases = [
        (Family::FirstOrder, GroupSpec::FreeAbelian(3), 3, 1.0, 5.0),
        (Family::PLaplace, GroupSpec::FreeAbelian(3), 3, 0.5, 1.2),
        (Family::Biharmonic, GroupSpec::FreeAbelian(5), 2, 0.5, 6.0),
        (Family::PBiharmonic, GroupSpec::FreeAbelian(5), 2, 0.5, 1.05),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let h = 1e-5;
    for (family, spec, radius, alpha, p) in cases {
        let ball = Ball::centered(spec, radius).unwrap();
        let kernel = Arc::new(riesz_kernel(&spectral_decompose(&ball).unwrap(), alpha).unwrap());
        let problem = Problem::new(family, kernel, p).unwrap();
        let mut worst_q: f64 = 0.0;
        let mut worst_c: f64 = 0.0;
        for _ in 0..100 {
            let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..ball.len()).map(|_| rng.random_range(0.2..1.0) * sign(rng)).collect() };
            // signs alternate along edges, so every difference of u is at
            // least 0.4 and |t|^p is smooth on the stencil u +- h w
            let parity = |i: usize| if ball.distance(i) % 2 == 0 { 1.0 } else { -1.0 };
            let u: Vec<f64> = (0..ball.len()).map(|i| parity(i) * rng.random_range(0.2..1.0)).collect();
            let u = LatticeFunction::new(Arc::clone(&ball), u).unwrap();
            let w = LatticeFunction::new(Arc::clone(&ball), draw(&mut rng)).unwrap();
            let shift = |s: f64| u.with_values(u.values().iter().zip(w.values()).map(|(a, b)| a + s * b).collect()).unwrap();
            let (up, um) = (shift(h), shift(-h));

            let g = functional_gradient(&problem, &u).unwrap();
            let exact = dot(g.values(), w.values());
            let fd = (functional_q(&problem, &up).unwrap() - functional_q(&problem, &um).unwrap()) / (2.0 * h);
            worst_q = worst_q.max((exact - fd).abs() / exact.abs().max(1e-300));

            let g = constraint_gradient(&problem, &u).unwrap();
            let exact = dot(g.values(), w.values());
            let fd = (constraint_energy(&problem, &up).unwrap() - constraint_energy(&problem, &um).unwrap()) / (2.0 * h);
            worst_c = worst_c.max((exact - fd).abs() / exact.abs().max(1e-300));
        }
        line.check(worst_q <= 1e-6, format!("{family} Q {worst_q:.1e}"));
        line.check(worst_c <= 1e-6, format!("{family} constraint {worst_c:.1e}"));
    }
}

fn sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

/// Maximum of `Q(u) / ||u||_{D^{1,2}}^{2p}` over `u = a 1_{d=0} + b 1_{d=1} + c 1_{d=2}`.
///
/// Built from kernel entries and an edge enumeration of `Z^3`, then searched
/// on a grid over the positive octant of the sphere with repeated zooming.
fn shell_oracle(kernel: &RieszKernel, p: f64) -> f64 {
    let ball = kernel.domain();
    let shell_of = |i: usize| ball.distance(i) as usize;
    let index: HashMap<Vec<i64>, usize> = ball.vertices().iter().enumerate().map(|(i, x)| (x.coords().to_vec(), i)).collect();

    let mut m = [[0.0; 3]; 3];
    for i in 0..ball.len() {
        for j in 0..ball.len() {
            let (si, sj) = (shell_of(i), shell_of(j));
            if si < 3 && sj < 3 {
                m[si][sj] += kernel.entry(i, j);
            }
        }
    }
    // every undirected lattice edge with an endpoint in shells 0..=3, counted twice
    let val = |x: &[i64], c: &[f64; 3]| index.get(x).map(|&i| shell_of(i)).filter(|&s| s < 3).map_or(0.0, |s| c[s]);
    let energy = |c: &[f64; 3]| {
        let mut e = 0.0;
        for x in ball.vertices().iter().map(|x| x.coords()).filter(|x| x.iter().map(|v| v.abs()).sum::<i64>() <= 3) {
            for k in 0..3 {
                let mut y = x.to_vec();
                y[k] += 1;
                e += (val(&y, c) - val(x, c)).powi(2);
                let mut z = x.to_vec();
                z[k] -= 1;
                if z.iter().map(|v| v.abs()).sum::<i64>() > 3 {
                    e += (val(&z, c) - val(x, c)).powi(2);
                }
            }
        }
        2.0 * e
    };
    let ratio = |th: f64, ph: f64| {
        let c = [th.cos(), th.sin() * ph.cos(), th.sin() * ph.sin()];
        let a: Vec<f64> = c.iter().map(|v| v.abs().powf(p)).collect();
        let q: f64 = (0..3).flat_map(|s| (0..3).map(move |t| (s, t))).map(|(s, t)| m[s][t] * a[s] * a[t]).sum();
        q / energy(&c).powf(p)
    };
    let half = std::f64::consts::FRAC_PI_2;
    let (mut lo, mut hi) = ([0.0, 0.0], [half, half]);
    let mut best = (0.0, 0.0, 0.0);
    for _ in 0..8 {
        let n = 60;
        for a in 0..=n {
            for b in 0..=n {
                let th = lo[0] + (hi[0] - lo[0]) * a as f64 / n as f64;
                let ph = lo[1] + (hi[1] - lo[1]) * b as f64 / n as f64;
                let r = ratio(th, ph);
                if r > best.0 {
                    best = (r, th, ph);
                }
            }
        }
        let w = [(hi[0] - lo[0]) / 10.0, (hi[1] - lo[1]) / 10.0];
        lo = [(best.1 - w[0]).max(0.0), (best.2 - w[1]).max(0.0)];
        hi = [(best.1 + w[0]).min(half), (best.2 + w[1]).min(half)];
    }
    best.0
}

fn criterion_7(line: &mut Line, desk: &Desk) {
    let r = &desk.result;
    line.check(r.status == Status::Converged, format!("{:?} after {} iterations", r.status, r.iterations));
    line.check(r.residual <= 1e-8, format!("residual {:.1e}", r.residual));
    let ball = desk.spectral.domain();
    let bulk_min = (0..ball.len())
        .filter(|&i| 2 * ball.distance(i) <= ball.radius())
        .map(|i| r.u_solution.values()[i])
        .fold(f64::INFINITY, f64::min);
    line.check(bulk_min > 0.0, format!("bulk min u {bulk_min:.3e}"));
    let oracle = shell_oracle(&desk.kernel, 5.0);
    let gap = (r.k_hat - oracle).abs();
    line.check(gap <= 1e-6, format!("K_hat {:.6e} vs three-shell oracle {oracle:.6e}, gap {gap:.2e}", r.k_hat));
    let bump = RandomFunctionSpec { distribution: Distribution::SmoothedBump(2.0), ..RandomFunctionSpec::gaussian(6, 0) };
    let harness = check_main_inequality(&desk.kernel, &bump, 5.0, 1000).unwrap();
    line.check(r.k_hat >= harness.max_ratio, format!("K_hat >= random harness {:.3e}", harness.max_ratio));
    line.check(desk.solve_secs <= 300.0, format!("solve {:.0} s", desk.solve_secs));
}

fn criterion_8(line: &mut Line, desk: &Desk) {
    let sys = build_system(&desk.problem, &desk.spectral, &desk.result.u_solution).unwrap();
    let (u, v) = (sys.u.values(), sys.v.values());
    let p = 5.0;
    let up: Vec<f64> = u.iter().map(|x| x.powf(p)).collect();
    let back = fractional_laplacian_apply(&desk.spectral, 1.0, &sys.v).unwrap();
    let frac = norm(&sub(back.values(), &up)) / norm(&up);
    line.check(frac <= 1e-9, format!("fractional {frac:.1e}"));
    let lap = laplacian_vec(desk.spectral.domain(), u);
    let vu: Vec<f64> = u.iter().zip(v).map(|(a, b)| b * a.powf(p - 1.0)).collect();
    let eq = norm(&lap.iter().zip(&vu).map(|(a, b)| a + b).collect::<Vec<_>>()) / norm(&vu);
    line.check(eq <= 1e-7, format!("equation {eq:.1e}"));
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    line.check(vmin > 0.0, format!("min v {vmin:.3e}"));
}

fn criterion_9(line: &mut Line) {
    let runs = [
        (Family::PLaplace, 3, 10, 0.5, 1.2),
        (Family::Biharmonic, 5, 6, 0.5, 6.0),
        (Family::PBiharmonic, 5, 5, 0.5, 1.05),
    ];
    for (family, n, radius, alpha, p) in runs {
        let t = Instant::now();
        let ball = Ball::centered(GroupSpec::FreeAbelian(n), radius).unwrap();
        let kernel = Arc::new(riesz_kernel(&spectral_decompose(&ball).unwrap(), alpha).unwrap());
        let problem = Problem::new(family, kernel, p).unwrap();
        let r = maximize(&problem, &SolveConfig::default()).unwrap();
        let min = r.u_solution.values().iter().copied().fold(f64::INFINITY, f64::min);
        line.check(
            r.status == Status::Converged && r.residual <= 1e-6 && min > 0.0,
            format!(
                "{family} Z^{n} r{radius}: {:?}, residual {:.1e}, min u {min:.1e}, {:.0} s",
                r.status,
                r.residual,
                t.elapsed().as_secs_f64()
            ),
        );
    }
}

fn criterion_10(line: &mut Line) {
    let ball = z3(6);
    let kernel = Arc::new(riesz_kernel(&spectral_decompose(&ball).unwrap(), 1.0).unwrap());
    let problem = Problem::new(Family::FirstOrder, kernel, 5.0).unwrap();
    let config = SolveConfig { seed: 11, init: Init::Random, ..SolveConfig::default() };
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for stem in ["a", "b"] {
        let out = maximize(&problem, &config).unwrap().save(dir.path(), stem).unwrap();
        files.push(out.into_iter().filter(|p| p.extension().is_some_and(|e| e == "csv")).collect::<Vec<_>>());
    }
    let read = |p: &Path| std::fs::read(p).unwrap();
    let same = files[0].len() == files[1].len() && files[0].iter().zip(&files[1]).all(|(a, b)| read(a) == read(b));
    line.check(same, format!("{} CSV pairs byte-identical", files[0].len()));
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn run(number: usize, name: &str, f: impl FnOnce(&mut Line)) -> bool {
    let t = Instant::now();
    let mut line = Line::new();
    if let Err(e) = catch_unwind(AssertUnwindSafe(|| f(&mut line))) {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        line.check(false, format!("panicked: {msg}"));
    }
    let verdict = if line.pass { "PASS" } else { "FAIL" };
    println!("criterion {number:>2} {verdict} {name} ({:.0} s): {}", t.elapsed().as_secs_f64(), line.text);
    line.pass
}

fn main() {
    let desk = Desk::new();
    let results = [
        run(1, "kernel asymptotics", criterion_1),
        run(2, "Green's function oracle", |l| criterion_2(l, &desk)),
        run(3, "inverse identity", |l| criterion_3(l, &desk)),
        run(4, "inequality suites", |l| criterion_4(l, &desk)),
        run(5, "Brezis-Lieb defects", |l| criterion_5(l, &desk)),
        run(6, "gradient check", criterion_6),
        run(7, "solver at desk scale", |l| criterion_7(l, &desk)),
        run(8, "system verification", |l| criterion_8(l, &desk)),
        run(9, "variant families", criterion_9),
        run(10, "determinism", criterion_10),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} of {} criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
