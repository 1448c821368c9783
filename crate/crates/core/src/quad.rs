//! Gauss–Legendre rules and an adaptive one-dimensional integrator.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Relative tolerance used for every one-dimensional integral in the crate.
pub const DEFAULT_REL_TOL: f64 = 1e-12;

const PANEL_ORDER: usize = 20;
const MAX_DEPTH: u32 = 48;

/// Nodes and weights of an n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the rule by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped from [-1, 1] onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    /// Fixed-order approximation of the integral of `f` over [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mut acc = 0.0;
        for (x, w) in self.mapped(a, b) {
            acc += w * f(x);
        }
        acc
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn panel_rule() -> &'static GaussLegendre {
    static RULE: std::sync::OnceLock<GaussLegendre> = std::sync::OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(PANEL_ORDER))
}

/// Adaptive Gauss–Legendre integration of `f` over [a, b].
///
/// A panel is accepted once its 20-point estimate and the sum over its two
/// halves agree to its share (by width) of `rel_tol` times the integral of
/// |f|, or to 1e-15 relative to the panel value.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let rule = panel_rule();
    let whole = rule.integrate(a, b, &f);
    let scale = rule.integrate(a, b, |x| f(x).abs()).max(f64::MIN_POSITIVE);
    let tol_per_length = rel_tol * scale / (b - a).abs();
    let mut total = 0.0;
    let mut ok = true;
    refine(&f, rule, a, b, whole, tol_per_length, 0, &mut total, &mut ok);
    if ok {
        Ok(total)
    } else {
        Err(Error::QuadratureNotConverged(format!(
            "adaptive Gauss-Legendre on [{a}, {b}] exceeded depth {MAX_DEPTH}"
        )))
    }
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    whole: f64,
    tol_per_length: f64,
    depth: u32,
    total: &mut f64,
    ok: &mut bool,
) {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(a, mid, f);
    let right = rule.integrate(mid, b, f);
    let halves = left + right;
    let err = (halves - whole).abs();
    if err <= tol_per_length * (b - a).abs() || err <= 1e-15 * halves.abs() {
        *total += halves;
        return;
    }
    if depth >= MAX_DEPTH || mid == a || mid == b {
        *ok = false;
        *total += halves;
        return;
    }
    refine(f, rule, a, mid, left, tol_per_length, depth + 1, total, ok);
    refine(f, rule, mid, b, right, tol_per_length, depth + 1, total, ok);
}
