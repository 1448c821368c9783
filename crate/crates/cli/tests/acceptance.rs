//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Positional arguments such as `AC3`
//! restrict the run to matching criteria.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use hyperuni_core::energy::{
    lemma_constant, stolarsky_residual, stolarsky_residual_closed_form, wce_distance_kernel,
};
use hyperuni_core::pointset::{fibonacci_sphere, load_pointset, maximize_distance_sum, random_uniform};
use hyperuni_core::specfun::{gamma_d, laplace_coeff, legendre_p, zdim};
use hyperuni_core::structure::{
    classify_large_caps, classify_small_caps, classify_threshold, default_phi_grid, default_t_grid,
    estimate_strength, IidEnsemble, Verdict, VerdictRules, WindowRule,
};
use hyperuni_core::variance::{
    default_spectral_tol, number_variance_direct_many, number_variance_pair_kernel,
    number_variance_spectral, variance_profile, weyl_sum, CenterSampling, ProfileMethod,
};
use hyperuni_core::{OptimizerOptions, PointSet, PointSetSequence, SphereDim, TruncationConfig};
use serde_json::Value;

type Check = Result<String, String>;

fn dim(d: u32) -> SphereDim {
    SphereDim::new(d).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn designs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/designs")
}

/// Bundled t-designs on S², t = 2..=21, with their strength.
fn designs() -> Vec<(usize, PointSet)> {
    (2..=21)
        .map(|t| {
            let name = format!("design_t{t:02}_n{:04}.txt", (t + 1) * (t + 1));
            (t, load_pointset(designs_dir().join(name)).unwrap())
        })
        .collect()
}

/// C_n^λ(x)/C_n^λ(1) from the unnormalized Gegenbauer recurrence,
/// cos(n arccos x) on the circle.
fn gegenbauer_ratio(d: u32, n: usize, x: f64) -> f64 {
    if d == 1 {
        return (n as f64 * x.clamp(-1.0, 1.0).acos()).cos();
    }
    let lambda = 0.5 * (d as f64 - 1.0);
    let c = |x: f64| {
        let (mut c0, mut c1) = (1.0, 2.0 * lambda * x);
        if n == 0 {
            return c0;
        }
        for k in 2..=n {
            let k = k as f64;
            let c2 = (2.0 * x * (k + lambda - 1.0) * c1 - (k + 2.0 * lambda - 2.0) * c0) / k;
            c0 = c1;
            c1 = c2;
        }
        c1
    };
    c(x) / c(1.0)
}

/// Composite 10-point Gauss–Legendre rule.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    const X: [f64; 5] = [
        0.14887433898163122,
        0.4333953941292472,
        0.6794095682990244,
        0.8650633666889845,
        0.9739065285171717,
    ];
    const W: [f64; 5] = [
        0.295524224714753,
        0.2692667193099965,
        0.219086362515982,
        0.14945134915058036,
        0.06667134430868807,
    ];
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in X.iter().zip(W) {
            acc += 0.5 * h * w * (f(mid + 0.5 * h * x) + f(mid - 0.5 * h * x));
        }
    }
    acc
}

/// Normalized surface measure of a cap of angle φ on S^d, d ≤ 3.
fn cap_sigma(d: u32, phi: f64) -> f64 {
    match d {
        1 => phi / PI,
        2 => 0.5 * (1.0 - phi.cos()),
        3 => (phi - phi.sin() * phi.cos()) / PI,
        _ => unreachable!(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn ac1() -> Check {
    let mut worst_legendre = 0.0f64;
    for d in 1..=4 {
        for n in 0..=50 {
            for k in 0..=200 {
                let x = -1.0 + 2.0 * k as f64 / 200.0;
                let err = (legendre_p(dim(d), n, x).unwrap() - gegenbauer_ratio(d, n, x)).abs();
                worst_legendre = worst_legendre.max(err);
            }
        }
    }
    ensure(worst_legendre < 1e-10, || format!("legendre error {worst_legendre:e}"))?;

    let mut worst_laplace = 0.0f64;
    for d in 1..=4 {
        let g = gamma_d(dim(d));
        for n in 1..=30 {
            for j in 1..20 {
                let phi = PI * j as f64 / 20.0;
                let quad = g * integrate(
                    |t| gegenbauer_ratio(d, n, t.cos()) * t.sin().powi(d as i32 - 1),
                    0.0,
                    phi,
                    16,
                );
                worst_laplace = worst_laplace.max((laplace_coeff(dim(d), n, phi).unwrap() - quad).abs());
            }
        }
    }
    ensure(worst_laplace < 1e-9, || format!("laplace error {worst_laplace:e}"))?;

    // Monte Carlo over y of P_n(<x,y>) P_n(<y,z>) against P_n(<x,z>)/Z(d,n)
    let mut worst_z = 0.0f64;
    let mut uncorrected_rejected = 0;
    let mut cases = 0;
    for d in 1..=3u32 {
        let xz = random_uniform(dim(d), 2, 100 + d as u64).unwrap();
        let (x, z) = (xz.point(0), xz.point(1));
        let ys = random_uniform(dim(d), 200_000, 200 + d as u64).unwrap();
        for n in 1..=6 {
            let samples: Vec<f64> = ys
                .points()
                .map(|y| legendre_p(dim(d), n, dot(x, y)).unwrap() * legendre_p(dim(d), n, dot(y, z)).unwrap())
                .collect();
            let k = samples.len() as f64;
            let mean = samples.iter().sum::<f64>() / k;
            let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0);
            let se = (var / k).sqrt();
            let p = legendre_p(dim(d), n, dot(x, z)).unwrap();
            let corrected = p / zdim(dim(d), n);
            let zscore = (mean - corrected).abs() / se;
            worst_z = worst_z.max(zscore);
            cases += 1;
            if (mean - p).abs() > 3.0 * se {
                uncorrected_rejected += 1;
            }
        }
    }
    ensure(worst_z <= 3.0, || format!("Funk-Hecke deviation {worst_z:.2} SE"))?;
    ensure(uncorrected_rejected == cases, || {
        format!("the form without 1/Z was rejected in only {uncorrected_rejected}/{cases} cases")
    })?;
    Ok(format!(
        "legendre {worst_legendre:.1e}, laplace {worst_laplace:.1e}, Funk-Hecke max {worst_z:.2} SE"
    ))
}

fn ac2() -> Check {
    let cfg = TruncationConfig::default();
    let mut worst = 0.0f64;
    for d in 1..=3u32 {
        let x = random_uniform(dim(d), 1, d as u64).unwrap();
        for k in 1..=50 {
            let phi = PI * k as f64 / 51.0;
            let tol = default_spectral_tol(dim(d), 1, phi);
            let v = number_variance_spectral(&x, phi, tol, &cfg).map_err(|e| e.to_string())?;
            let s = cap_sigma(d, phi);
            let err = (v.value - s * (1.0 - s)).abs();
            ensure(err <= v.tail_bound, || format!("d={d} phi={phi}: error {err:e} > tail {:e}", v.tail_bound))?;
            worst = worst.max(err);
        }
    }
    let x = random_uniform(dim(2), 1, 9).unwrap();
    let v = number_variance_spectral(&x, PI / 3.0, 1e-4, &cfg).map_err(|e| e.to_string())?;
    ensure((v.value - 0.1875).abs() <= v.tail_bound, || format!("d=2, pi/3: {}", v.value))?;
    Ok(format!("150 angles within tail (max error {worst:.1e}); d=2, pi/3 -> {:.6}", v.value))
}

fn ac3() -> Check {
    let phis = [PI / 6.0, PI / 3.0, PI / 2.0, 2.0 * PI / 3.0];
    let method = ProfileMethod::Spectral {
        tol: None,
        cfg: TruncationConfig::default(),
    };
    let mut sets: Vec<PointSet> = (0..20u64)
        .map(|k| random_uniform(dim(1 + (k % 3) as u32), 40 + 25 * k as usize, 1000 + k).unwrap())
        .collect();
    sets.push(fibonacci_sphere(250).unwrap());
    sets.push(fibonacci_sphere(1000).unwrap());
    let mut worst = 0.0f64;
    for (k, x) in sets.iter().enumerate() {
        let mc = number_variance_direct_many(x, &phis, 20_000, k as u64, CenterSampling::Uniform)
            .map_err(|e| e.to_string())?;
        let s = variance_profile(x, &phis, &method).map_err(|e| e.to_string())?;
        for (a, m) in mc.iter().enumerate() {
            let gap = (s.values[a] - m.estimate).abs();
            let allowed = 3.0 * m.standard_error + s.errors[a];
            ensure(gap <= allowed, || {
                format!("set {k} (d={}, N={}) phi={}: gap {gap:e} > {allowed:e}", x.dim(), x.len(), phis[a])
            })?;
            worst = worst.max(gap / allowed);
        }
    }
    Ok(format!("{} sets x 4 angles, largest gap {:.2} of allowance", sets.len(), worst))
}

fn ac4() -> Check {
    let n = 1000;
    let phi = PI / 3.0;
    let mut ratios = Vec::new();
    for seed in 0..200u64 {
        let x = random_uniform(dim(2), n, 7_000 + seed).unwrap();
        let v = number_variance_pair_kernel(&x, &[phi]).map_err(|e| e.to_string())?[0];
        ratios.push(v / (n as f64 * 0.25 * 0.75));
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    ensure((0.9..=1.1).contains(&mean), || format!("mean ratio {mean}"))?;
    Ok(format!("mean V/(N sigma(1-sigma)) over 200 seeds = {mean:.4}"))
}

fn ac5() -> Check {
    let mut sets: Vec<PointSet> = Vec::new();
    for d in 1..=3u32 {
        for (k, n) in [10usize, 100, 500].into_iter().enumerate() {
            sets.push(random_uniform(dim(d), n, 300 + 10 * d as u64 + k as u64).unwrap());
        }
    }
    sets.push(fibonacci_sphere(500).unwrap());
    sets.extend(designs().into_iter().map(|(_, x)| x));
    let mut worst_closed = 0.0f64;
    for x in &sets {
        worst_closed = worst_closed.max(stolarsky_residual_closed_form(x).abs());
    }
    ensure(worst_closed <= 1e-12, || format!("closed-form residual {worst_closed:e}"))?;
    let cfg = TruncationConfig::default();
    let mut worst_series = 0.0f64;
    for x in sets.iter().filter(|x| x.dim().get() == 2 && x.len() <= 500) {
        let r = stolarsky_residual(x, 1e-6, &cfg).map_err(|e| e.to_string())?;
        ensure(r.residual.abs() <= 1e-8 + r.tail_bound, || {
            format!("N={}: series residual {:e}, tail {:e}", x.len(), r.residual, r.tail_bound)
        })?;
        worst_series = worst_series.max(r.residual.abs());
    }
    Ok(format!(
        "{} sets: closed form max {worst_closed:.1e}; series max {worst_series:.1e}",
        sets.len()
    ))
}

fn ac6() -> Check {
    let designs = designs();
    let mut worst = 0.0f64;
    for (t, x) in &designs {
        let n2 = (x.len() * x.len()) as f64;
        for n in 1..=*t {
            let w = weyl_sum(x, n).map_err(|e| e.to_string())?.value;
            ensure(w <= 1e-8 * n2, || format!("t={t} n={n}: W = {w:e}"))?;
            worst = worst.max(w / n2);
        }
    }
    let seq = PointSetSequence::new("designs", designs.into_iter().map(|(_, x)| x).collect())
        .map_err(|e| e.to_string())?;
    let table = estimate_strength(&seq, &[1.25, 1.5, 2.0], &VerdictRules::default()).map_err(|e| e.to_string())?;
    let mut slopes = Vec::new();
    for row in &table.rows {
        let expected = -row.s / 2.0;
        ensure((row.slope - expected).abs() <= 0.15, || format!("s={}: slope {}", row.s, row.slope))?;
        slopes.push(format!("{:.3}", row.slope));
    }
    Ok(format!("max W_n/N^2 = {worst:.1e}; slopes {}", slopes.join(", ")))
}

fn pairwise_distances(x: &PointSet) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..x.len() {
        for j in 0..i {
            out.push(dot(x.point(i), x.point(i)) + dot(x.point(j), x.point(j)) - 2.0 * dot(x.point(i), x.point(j)));
        }
    }
    out.into_iter().map(|r| r.max(0.0).sqrt()).collect()
}

fn ac7() -> Check {
    let opts = OptimizerOptions {
        restarts: 8,
        ..OptimizerOptions::default()
    };
    let mut report = Vec::new();
    for (n, target) in [(4usize, (8.0f64 / 3.0).sqrt()), (3, 3f64.sqrt())] {
        let r = maximize_distance_sum(dim(2), n, 1.5, &opts).map_err(|e| e.to_string())?;
        let worst = pairwise_distances(r.points())
            .iter()
            .map(|d| (d - target).abs())
            .fold(0.0, f64::max);
        ensure(worst <= 1e-6, || format!("N={n}: distance error {worst:e}"))?;
        report.push(format!("N={n} error {worst:.1e}"));
    }
    Ok(report.join("; "))
}

fn ac8() -> Check {
    let sizes = vec![250, 500, 1000, 2000, 4000];
    let rules = VerdictRules::default();
    let fib = PointSetSequence::new(
        "fibonacci",
        sizes.iter().map(|&n| fibonacci_sphere(n).unwrap()).collect(),
    )
    .map_err(|e| e.to_string())?;
    let iid = IidEnsemble::new(dim(2), sizes, 100, 2024).map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    for (name, src, expected) in [
        ("fibonacci", &fib as &dyn hyperuni_core::SequenceSource, Verdict::Consistent),
        ("iid", &iid, Verdict::Inconsistent),
    ] {
        let large = classify_large_caps(src, &default_phi_grid(), &rules).map_err(|e| e.to_string())?;
        let small = classify_small_caps(src, &WindowRule::default(), &rules).map_err(|e| e.to_string())?;
        let threshold = classify_threshold(src, &default_t_grid(), &rules).map_err(|e| e.to_string())?;
        let beta = threshold.exponents[0].slope;
        let verdicts = [large.verdict, small.verdict, threshold.verdict];
        ensure(verdicts.iter().all(|v| *v == expected), || {
            format!("{name}: verdicts {verdicts:?}, expected {expected:?}")
        })?;
        if name == "fibonacci" {
            ensure((0.7..=1.3).contains(&beta), || format!("fibonacci beta {beta}"))?;
        }
        lines.push(format!("{name} {expected:?} (beta {beta:.3})"));
    }
    Ok(lines.join("; "))
}

fn ac9() -> Check {
    let phis: Vec<f64> = (1..40).map(|k| 0.5 * PI * k as f64 / 40.0).collect();
    let mut sets: Vec<PointSet> = Vec::new();
    for d in 1..=3u32 {
        for k in 0..5u64 {
            sets.push(random_uniform(dim(d), 20 + 120 * k as usize, 900 + 10 * d as u64 + k).unwrap());
        }
    }
    sets.extend([250, 1000].map(|n| fibonacci_sphere(n).unwrap()));
    sets.extend(designs().into_iter().map(|(_, x)| x));
    let constants: Vec<f64> = (1..=3).map(|d| lemma_constant(dim(d))).collect();
    let mut violations = 0;
    let mut tightest = 0.0f64;
    for x in &sets {
        let d = x.dim().get();
        let c = constants[d as usize - 1];
        let n2 = (x.len() * x.len()) as f64;
        let wce2 = wce_distance_kernel(x).wce_squared;
        let v = number_variance_pair_kernel(x, &phis).map_err(|e| e.to_string())?;
        for (phi, value) in phis.iter().zip(&v) {
            let bound = c * phi.sin().powi(d as i32 - 1) * n2 * wce2;
            if *value > bound {
                violations += 1;
            }
            tightest = tightest.max(value / bound);
        }
    }
    ensure(violations == 0, || format!("{violations} violations"))?;
    Ok(format!(
        "C = {:.4}, {:.4}, {:.4}; {} sets x {} angles, max V/bound {tightest:.3}",
        constants[0],
        constants[1],
        constants[2],
        sets.len(),
        phis.len()
    ))
}

fn hyperuni(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hyperuni"))
        .args(args)
        .env_remove("HYPERUNI_THREADS")
        .output()
        .map_err(|e| e.to_string())?;
    match out.status.code() {
        Some(0) => Ok(()),
        code => Err(format!("{args:?} exited with {code:?}: {}", String::from_utf8_lossy(&out.stderr))),
    }
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Compares every number outside `config` blocks; returns how many were
/// checked.
fn compare(a: &Value, b: &Value, path: &str) -> Result<usize, String> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            ensure((x - y).abs() <= 1e-12 * x.abs().max(1.0), || format!("{path}: {x} vs {y}"))?;
            Ok(1)
        }
        (Value::Object(x), Value::Object(y)) => {
            ensure(x.len() == y.len(), || format!("{path}: key sets differ"))?;
            let mut count = 0;
            for (k, v) in x {
                if k != "config" {
                    let other = y.get(k).ok_or_else(|| format!("{path}.{k} missing"))?;
                    count += compare(v, other, &format!("{path}.{k}"))?;
                }
            }
            Ok(count)
        }
        (Value::Array(x), Value::Array(y)) => {
            ensure(x.len() == y.len(), || format!("{path}: lengths differ"))?;
            let mut count = 0;
            for (i, (u, v)) in x.iter().zip(y).enumerate() {
                count += compare(u, v, &format!("{path}[{i}]"))?;
            }
            Ok(count)
        }
        _ => ensure(a == b, || format!("{path}: {a} vs {b}")).map(|()| 0),
    }
}

fn json_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    files
}

/// Re-runs `command` from the embedded config of `report` and compares
/// every JSON report in the two output directories.
fn replay(command: &str, report: &Path, first: &Path, second: &Path) -> Result<usize, String> {
    let s = |p: &Path| p.to_str().unwrap().to_string();
    hyperuni(&[command, "--config", &s(report), "--out", &s(second)])?;
    let mut count = 0;
    for file in json_files(first) {
        let name = file.file_name().unwrap();
        let a = read_json(&file)?;
        let b = read_json(&second.join(name))?;
        ensure(a["schema_version"] == 1, || format!("{}: schema_version", file.display()))?;
        ensure(a["config"]["command"] == command, || format!("{}: embedded config", file.display()))?;
        count += compare(&a, &b, &name.to_string_lossy())?;
    }
    Ok(count)
}

fn ac10() -> Check {
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let dir = |name: &str| tmp.path().join(name);
    let s = |p: PathBuf| p.to_str().unwrap().to_string();
    let mut count = 0;

    hyperuni(&["generate", "--family", "maxdist", "--n", "12", "--restarts", "2", "--seed", "5", "--out", &s(dir("g1"))])?;
    count += replay("generate", &dir("g1").join("maxdist_d2_n000012.json"), &dir("g1"), &dir("g2"))?;
    let points = |d: &str| std::fs::read(dir(d).join("maxdist_d2_n000012.txt")).unwrap();
    ensure(points("g1") == points("g2"), || "maxdist point files differ".into())?;

    hyperuni(&["generate", "--family", "random", "--d", "3", "--sizes", "100,200", "--seed", "11", "--out", &s(dir("pts"))])?;
    hyperuni(&[
        "analyze", &s(dir("pts")), "--method", "monte-carlo", "--centers", "4000", "--seed", "3",
        "--check", "stolarsky,l2", "--s", "2,2.5", "--out", &s(dir("a1")),
    ])?;
    count += replay("analyze", &dir("a1").join("random_d3_n000100.analysis.json"), &dir("a1"), &dir("a2"))?;

    hyperuni(&[
        "classify", "--family", "random", "--sizes", "40,80,160,320", "--replicas", "100", "--seed", "8",
        "--s", "1.25,2", "--out", &s(dir("c1")),
    ])?;
    count += replay("classify", &dir("c1").join("classify_summary.json"), &dir("c1"), &dir("c2"))?;
    Ok(format!("{count} numeric fields reproduced across generate, analyze and classify"))
}

struct Criterion {
    id: &'static str,
    title: &'static str,
    budget: Duration,
    run: fn() -> Check,
}

fn main() {
    let minutes = |m: u64| Duration::from_secs(60 * m);
    let criteria = [
        Criterion { id: "AC1", title: "special-function oracles", budget: minutes(1), run: ac1 },
        Criterion { id: "AC2", title: "single-point Parseval", budget: minutes(1), run: ac2 },
        Criterion { id: "AC3", title: "spectral vs Monte Carlo variance", budget: minutes(5), run: ac3 },
        Criterion { id: "AC4", title: "i.i.d. baseline", budget: minutes(5), run: ac4 },
        Criterion { id: "AC5", title: "Stolarsky identity", budget: minutes(2), run: ac5 },
        Criterion { id: "AC6", title: "t-design validation", budget: minutes(5), run: ac6 },
        Criterion { id: "AC7", title: "distance-sum optimizer", budget: minutes(1), run: ac7 },
        Criterion { id: "AC8", title: "regime separation", budget: minutes(30), run: ac8 },
        Criterion { id: "AC9", title: "variance bound via worst-case error", budget: minutes(5), run: ac9 },
        Criterion { id: "AC10", title: "reproducibility from embedded config", budget: minutes(5), run: ac10 },
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in &criteria {
        if !filters.is_empty() && !filters.iter().any(|f| f.eq_ignore_ascii_case(c.id)) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= c.budget {
                Ok(detail)
            } else {
                Err(format!("{detail}; over the {}s budget", c.budget.as_secs()))
            }
        });
        let (status, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{status} {} {} ({:.1}s): {detail}", c.id, c.title, elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
