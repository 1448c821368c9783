//! Finite point sets on S^d: construction, file I/O and distance-sum
//! maximization.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{domain, Error, Result};
use crate::specfun::SphereDim;
use crate::sum::FixedPointSum;

const UNIT_TOL: f64 = 1e-12;
const LOAD_UNIT_TOL: f64 = 1e-6;

/// Where a point set came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub seed: Option<u64>,
    #[serde(default)]
    pub parameters: BTreeMap<String, Value>,
}

impl Provenance {
    pub fn new(generator: impl Into<String>, seed: Option<u64>) -> Self {
        Self {
            generator: generator.into(),
            seed,
            parameters: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }
}

/// N unit vectors in R^(d+1), stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: SphereDim,
    coords: Vec<f64>,
    provenance: Provenance,
}

impl PointSet {
    /// Builds a set from row-major coordinates, checking that every point is
    /// within 1e-12 of unit length.
    pub fn new(dim: SphereDim, coords: Vec<f64>, provenance: Provenance) -> Result<Self> {
        let m = dim.ambient();
        if coords.is_empty() || coords.len() % m != 0 {
            return Err(Error::InvalidParameter(format!(
                "need a positive multiple of {m} coordinates, got {}",
                coords.len()
            )));
        }
        for (i, p) in coords.chunks_exact(m).enumerate() {
            let norm = norm(p);
            if !((norm - 1.0).abs() <= UNIT_TOL) {
                return Err(Error::InvalidParameter(format!(
                    "point {i} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(Self {
            dim,
            coords,
            provenance,
        })
    }

    /// Builds a set after scaling every nonzero point to unit length.
    pub fn normalized(dim: SphereDim, mut coords: Vec<f64>, provenance: Provenance) -> Result<Self> {
        let m = dim.ambient();
        if coords.len() % m != 0 {
            return Err(Error::InvalidParameter(format!(
                "need a positive multiple of {m} coordinates, got {}",
                coords.len()
            )));
        }
        for (i, p) in coords.chunks_exact_mut(m).enumerate() {
            let r = norm(p);
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter(format!("point {i} cannot be normalized")));
            }
            p.iter_mut().for_each(|x| *x /= r);
        }
        Self::new(dim, coords, provenance)
    }

    pub fn dim(&self) -> SphereDim {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim.ambient()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let m = self.dim.ambient();
        &self.coords[i * m..(i + 1) * m]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim.ambient())
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Applies the (d+1)×(d+1) row-major matrix `rotation` to every point.
    pub fn rotated(&self, rotation: &[f64]) -> Result<Self> {
        let m = self.dim.ambient();
        if rotation.len() != m * m {
            return Err(Error::InvalidParameter(format!(
                "rotation needs {} entries, got {}",
                m * m,
                rotation.len()
            )));
        }
        let mut coords = Vec::with_capacity(self.coords.len());
        for p in self.points() {
            for row in rotation.chunks_exact(m) {
                coords.push(dot(row, p));
            }
        }
        Self::normalized(self.dim, coords, self.provenance.clone())
    }

    /// Reorders the points so that point `k` of the result is point
    /// `order[k]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        let mut coords = Vec::with_capacity(self.coords.len());
        for &i in order {
            if i >= self.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidParameter("order is not a permutation".into()));
            }
            coords.extend_from_slice(self.point(i));
        }
        if order.len() != self.len() {
            return Err(Error::InvalidParameter("order is not a permutation".into()));
        }
        Ok(Self {
            dim: self.dim,
            coords,
            provenance: self.provenance.clone(),
        })
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn gaussian_unit_vector(rng: &mut ChaCha8Rng, m: usize, out: &mut Vec<f64>) {
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let r = norm(&v);
        if r > 1e-150 {
            out.extend(v.iter().map(|x| x / r));
            return;
        }
    }
}

/// N points drawn i.i.d. from the uniform distribution on S^d.
pub fn random_uniform(dim: SphereDim, n: usize, seed: u64) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    let m = dim.ambient();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(n * m);
    for _ in 0..n {
        gaussian_unit_vector(&mut rng, m, &mut coords);
    }
    let provenance = Provenance::new("random", Some(seed)).with("n", n);
    PointSet::normalized(dim, coords, provenance)
}

/// Offset spherical Fibonacci lattice on S^2: z_k = 1 − (2k+1)/N and
/// longitude 2πk times the golden ratio conjugate.
pub fn fibonacci_sphere(n: usize) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let nf = n as f64;
    let mut coords = Vec::with_capacity(3 * n);
    for k in 0..n {
        let z = 1.0 - (2.0 * k as f64 + 1.0) / nf;
        let r = ((1.0 - z) * (1.0 + z)).sqrt();
        let lon = 2.0 * std::f64::consts::PI * (k as f64 * golden).fract();
        coords.extend_from_slice(&[r * lon.cos(), r * lon.sin(), z]);
    }
    let dim = SphereDim::new(2)?;
    PointSet::normalized(dim, coords, Provenance::new("fibonacci", None).with("n", n))
}

/// Haar-random rotation of R^(d+1) as a row-major matrix (Gram–Schmidt on a
/// Gaussian matrix).
pub fn random_rotation(dim: SphereDim, seed: u64) -> Vec<f64> {
    let m = dim.ambient();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    while rows.len() < m {
        let mut v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for r in &rows {
                let c = dot(r, &v);
                v.iter_mut().zip(r).for_each(|(x, y)| *x -= c * y);
            }
        }
        let r = norm(&v);
        if r > 1e-8 {
            rows.push(v.into_iter().map(|x| x / r).collect());
        }
    }
    rows.concat()
}

/// Parses the text point-set format. `path` is only used in error messages.
pub fn parse_pointset(text: &str, path: &Path, dim: Option<SphereDim>) -> Result<PointSet> {
    let mut coords = Vec::new();
    let mut width: Option<usize> = dim.map(|d| d.ambient());
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for token in content.split_whitespace() {
            let x: f64 = token.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("cannot parse {token:?} as a number"),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("non-finite coordinate {token:?}"),
                });
            }
            row.push(x);
        }
        let expected = *width.get_or_insert(row.len());
        if row.len() != expected || expected < 2 {
            return Err(Error::DimensionMismatch {
                path: path.to_path_buf(),
                line,
                expected: expected.max(2),
                found: row.len(),
            });
        }
        let r = norm(&row);
        if !((r - 1.0).abs() <= LOAD_UNIT_TOL) {
            return Err(Error::NonUnitNorm {
                path: path.to_path_buf(),
                line,
                norm: r,
            });
        }
        coords.extend(row.iter().map(|x| x / r));
    }
    let Some(width) = width.filter(|_| !coords.is_empty()) else {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: text.lines().count(),
            msg: "file contains no points".into(),
        });
    };
    let dim = SphereDim::new(width as u32 - 1)?;
    let provenance = Provenance::new("file", None).with("path", path.display().to_string());
    PointSet::new(dim, coords, provenance)
}

/// Reads a point-set file; the dimension is inferred from the first point.
pub fn load_pointset(path: impl AsRef<Path>) -> Result<PointSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_pointset(&text, path, None)
}

/// Renders a point set in the text format with 17 significant digits.
pub fn format_pointset(x: &PointSet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# generator: {}", x.provenance().generator);
    for p in x.points() {
        let row: Vec<String> = p.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Writes `x` to `path` via a temporary file and a rename.
pub fn save_pointset(x: &PointSet, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), format_pointset(x).as_bytes())
}

fn check_exponent(exponent: f64) -> Result<()> {
    if exponent > 0.0 && exponent < 2.0 {
        Ok(())
    } else {
        Err(domain("exponent", exponent, "(0, 2)"))
    }
}

/// Σ_{j,k} |x_j − x_k|^exponent over ordered pairs. The result is identical
/// for every ordering of the points.
pub fn pairwise_distance_sum(x: &PointSet, exponent: f64) -> Result<f64> {
    check_exponent(exponent)?;
    Ok(distance_power_sum(x.coords(), x.dim().ambient(), exponent))
}

pub(crate) fn distance_power_sum(coords: &[f64], m: usize, exponent: f64) -> f64 {
    let n = coords.len() / m;
    let rows: Vec<FixedPointSum> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = FixedPointSum::new();
            let p = &coords[i * m..(i + 1) * m];
            for j in i + 1..n {
                let r = distance(p, &coords[j * m..(j + 1) * m]);
                acc.add(power(r, exponent));
            }
            acc
        })
        .collect();
    let mut total = FixedPointSum::new();
    rows.iter().for_each(|r| total.merge(r));
    2.0 * total.value()
}

#[inline]
fn power(r: f64, exponent: f64) -> f64 {
    if exponent == 1.0 {
        r
    } else {
        r.powf(exponent)
    }
}

/// Settings for [`maximize_distance_sum`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    pub max_iterations: usize,
    /// Initial angular step of the line search.
    pub step_size: f64,
    /// Stop once the largest tangential gradient norm falls below this.
    pub gradient_tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            step_size: 0.1,
            gradient_tolerance: 1e-9,
            restarts: 8,
            seed: 0,
        }
    }
}

impl OptimizerOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be at least 1".into()));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(domain("gradient_tolerance", self.gradient_tolerance, "(0, inf)"));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(domain("step_size", self.step_size, "(0, inf)"));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// One projected-gradient run.
#[derive(Debug, Clone)]
pub struct OptimizerRun {
    pub points: PointSet,
    pub objective: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    /// Objective after each accepted step, starting with the initial value.
    pub trace: Vec<f64>,
}

/// Best run over all restarts plus every restart's final objective.
#[derive(Debug, Clone)]
pub struct MaximizerResult {
    pub best: OptimizerRun,
    pub best_restart: usize,
    pub restart_objectives: Vec<f64>,
}

impl MaximizerResult {
    pub fn converged(&self) -> bool {
        self.best.converged
    }

    pub fn points(&self) -> &PointSet {
        &self.best.points
    }
}

fn exponent_for(dim: SphereDim, tau: f64) -> Result<f64> {
    let d = dim.get() as f64;
    if tau > 0.5 * d && tau < 0.5 * d + 1.0 {
        Ok(2.0 * tau - d)
    } else {
        Err(domain("tau", tau, "(d/2, d/2 + 1)"))
    }
}

/// Local maximizer of Σ_{j,k} |x_j − x_k|^(2τ−d) by projected gradient ascent
/// from `restarts` random starts. Restarts run in parallel; ties are broken by
/// restart index.
pub fn maximize_distance_sum(
    dim: SphereDim,
    n: usize,
    tau: f64,
    opts: &OptimizerOptions,
) -> Result<MaximizerResult> {
    exponent_for(dim, tau)?;
    opts.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    let runs: Vec<OptimizerRun> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let seed = opts.seed.wrapping_add(r as u64);
            let init = random_uniform(dim, n, seed)?;
            maximize_distance_sum_from(&init, tau, opts, seed)
        })
        .collect::<Result<_>>()?;
    let restart_objectives: Vec<f64> = runs.iter().map(|r| r.objective).collect();
    let mut best_restart = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.objective > runs[best_restart].objective {
            best_restart = r;
        }
    }
    let mut best = runs.into_iter().nth(best_restart).expect("at least one restart");
    let provenance = Provenance::new("maxdist", Some(opts.seed))
        .with("n", n)
        .with("tau", tau)
        .with("options", serde_json::to_value(opts).unwrap_or(Value::Null))
        .with("restart_objectives", json!(restart_objectives))
        .with("best_restart", best_restart)
        .with("objective", best.objective)
        .with("iterations", best.iterations)
        .with("gradient_norm", best.gradient_norm)
        .with("converged", best.converged);
    best.points = best.points.with_provenance(provenance);
    Ok(MaximizerResult {
        best,
        best_restart,
        restart_objectives,
    })
}

/// Single projected-gradient run from `init`. `seed` drives the tangent noise
/// used to separate coincident points.
pub fn maximize_distance_sum_from(
    init: &PointSet,
    tau: f64,
    opts: &OptimizerOptions,
    seed: u64,
) -> Result<OptimizerRun> {
    let dim = init.dim();
    let alpha = exponent_for(dim, tau)?;
    opts.validate()?;
    let m = dim.ambient();
    let n = init.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut x = init.coords().to_vec();
    separate_collisions(&mut x, m, &mut rng);
    let mut f = distance_power_sum(&x, m, alpha);
    let mut trace = vec![f];
    let mut grad = vec![0.0; x.len()];
    let mut trial = vec![0.0; x.len()];
    let mut trial_grad = vec![0.0; x.len()];
    tangent_gradient(&x, m, alpha, &mut grad);
    let mut gnorm = max_row_norm(&grad, m);
    // the slack in the line search allows tiny decreases, so keep the best
    // iterate seen
    let mut best = (x.clone(), f, gnorm);
    // scale of the first step: the point with the largest gradient moves by
    // `step_size` radians
    let mut eta = opts.step_size / gnorm.max(f64::MIN_POSITIVE);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        if gnorm <= opts.gradient_tolerance || n == 1 {
            converged = true;
            break;
        }
        iterations += 1;
        let gsq: f64 = grad.iter().map(|g| g * g).sum();
        // Armijo test with a slack at the resolution of the objective, so
        // that steps near convergence are judged by the gradient alone
        let reference = f - OBJECTIVE_RESOLUTION * f.abs();
        let mut accepted = false;
        while eta * gnorm > 1e-15 {
            for ((t, xi), gi) in trial.iter_mut().zip(&x).zip(&grad) {
                *t = xi + eta * gi;
            }
            for p in trial.chunks_exact_mut(m) {
                let r = norm(p);
                p.iter_mut().for_each(|v| *v /= r);
            }
            let ft = distance_power_sum(&trial, m, alpha);
            if ft >= reference + 1e-4 * eta * gsq {
                f = ft;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            // no ascent step of any length improves F: a numerical stationary point
            converged = gnorm <= opts.gradient_tolerance.sqrt();
            break;
        }
        if separate_collisions(&mut trial, m, &mut rng) {
            f = distance_power_sum(&trial, m, alpha);
        }
        trace.push(f);
        tangent_gradient(&trial, m, alpha, &mut trial_grad);
        // Barzilai-Borwein step from the displacement and gradient change
        let (mut ss, mut sy) = (0.0, 0.0);
        for t in 0..x.len() {
            let st = trial[t] - x[t];
            ss += st * st;
            sy -= st * (trial_grad[t] - grad[t]);
        }
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut grad, &mut trial_grad);
        gnorm = max_row_norm(&grad, m);
        if f >= best.1 {
            best = (x.clone(), f, gnorm);
        }
        let cap = 1.0 / gnorm.max(f64::MIN_POSITIVE);
        eta = if sy > 0.0 { (ss / sy).min(cap) } else { (2.0 * eta).min(cap) };
    }
    let (x, f, gnorm) = best;
    let converged = converged && gnorm <= opts.gradient_tolerance.sqrt();
    let points = PointSet::new(dim, x, Provenance::new("maxdist-run", Some(seed)))?;
    Ok(OptimizerRun {
        points,
        objective: f,
        iterations,
        gradient_norm: gnorm,
        converged,
        trace,
    })
}

const OBJECTIVE_RESOLUTION: f64 = 1e-12;

fn max_row_norm(v: &[f64], m: usize) -> f64 {
    v.chunks_exact(m).map(norm).fold(0.0, f64::max)
}

fn tangent_gradient(x: &[f64], m: usize, alpha: f64, grad: &mut [f64]) {
    let n = x.len() / m;
    grad.par_chunks_exact_mut(m).enumerate().for_each(|(j, g)| {
        g.iter_mut().for_each(|v| *v = 0.0);
        let p = &x[j * m..(j + 1) * m];
        for k in 0..n {
            if k == j {
                continue;
            }
            let q = &x[k * m..(k + 1) * m];
            let r = distance(p, q);
            // ∂/∂x_j of both ordered terms (j,k) and (k,j)
            let w = if alpha == 1.0 {
                2.0 / r
            } else {
                2.0 * alpha * r.powf(alpha - 2.0)
            };
            for t in 0..m {
                g[t] += w * (p[t] - q[t]);
            }
        }
        let radial = dot(g, p);
        for t in 0..m {
            g[t] -= radial * p[t];
        }
    });
}

/// Nudges points that coincide with an earlier point by 1e-9 along a random
/// tangent direction. Returns whether anything moved.
fn separate_collisions(x: &mut [f64], m: usize, rng: &mut ChaCha8Rng) -> bool {
    let n = x.len() / m;
    let mut moved = false;
    for j in 1..n {
        for k in 0..j {
            if distance(&x[j * m..(j + 1) * m], &x[k * m..(k + 1) * m]) > 1e-12 {
                continue;
            }
            let p = x[j * m..(j + 1) * m].to_vec();
            let mut v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            let c = dot(&v, &p);
            v.iter_mut().zip(&p).for_each(|(a, b)| *a -= c * b);
            let r = norm(&v).max(1e-300);
            let q = &mut x[j * m..(j + 1) * m];
            for t in 0..m {
                q[t] = p[t] + 1e-9 * v[t] / r;
            }
            let r = norm(q);
            q.iter_mut().for_each(|a| *a /= r);
            moved = true;
        }
    }
    moved
}
