//! Oracles shared by the integration tests. They are written independently
//! of the library: fixed Gauss–Legendre panels, plain double loops and
//! textbook formulas.

#![allow(dead_code)]

use hyperuni_core::SphereDim;

const GL10_X: [f64; 10] = [
    -0.9739065285171717,
    -0.8650633666889845,
    -0.6794095682990244,
    -0.4333953941292472,
    -0.14887433898163122,
    0.14887433898163122,
    0.4333953941292472,
    0.6794095682990244,
    0.8650633666889845,
    0.9739065285171717,
];
const GL10_W: [f64; 10] = [
    0.06667134430868807,
    0.14945134915058036,
    0.219086362515982,
    0.2692667193099965,
    0.295524224714753,
    0.295524224714753,
    0.2692667193099965,
    0.219086362515982,
    0.14945134915058036,
    0.06667134430868807,
];

/// Nodes and weights of the composite 10-point Gauss–Legendre rule on
/// `panels` equal panels of [a, b].
pub fn gauss_nodes(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(10 * panels);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in GL10_X.iter().zip(GL10_W) {
            out.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}

pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    gauss_nodes(a, b, panels).into_iter().map(|(x, w)| w * f(x)).sum()
}

pub fn dim(d: u32) -> SphereDim {
    SphereDim::new(d).unwrap()
}

/// P_n^(d)(x) as C_n^λ(x)/C_n^λ(1), λ = (d−1)/2, with C_n^λ from the
/// unnormalized Gegenbauer recurrence; cos(n arccos x) for d = 1.
pub fn gegenbauer_ratio(d: u32, n: usize, x: f64) -> f64 {
    if d == 1 {
        return (n as f64 * x.clamp(-1.0, 1.0).acos()).cos();
    }
    let lambda = 0.5 * (d as f64 - 1.0);
    let c = |x: f64| -> f64 {
        let (mut c0, mut c1) = (1.0, 2.0 * lambda * x);
        if n == 0 {
            return c0;
        }
        for k in 2..=n {
            let kf = k as f64;
            let c2 = (2.0 * x * (kf + lambda - 1.0) * c1 - (kf + 2.0 * lambda - 2.0) * c0) / kf;
            c0 = c1;
            c1 = c2;
        }
        c1
    };
    c(x) / c(1.0)
}

/// Σ_{i,j} P_n^(d)(⟨x_i, x_j⟩) by a plain double loop.
pub fn naive_weyl_sum(d: u32, coords: &[f64], n: usize) -> f64 {
    let m = d as usize + 1;
    let pts: Vec<&[f64]> = coords.chunks_exact(m).collect();
    let mut acc = 0.0;
    for p in &pts {
        for q in &pts {
            let t: f64 = p.iter().zip(q.iter()).map(|(a, b)| a * b).sum();
            acc += gegenbauer_ratio(d, n, t.clamp(-1.0, 1.0));
        }
    }
    acc
}

/// Σ_{i,j} |x_i − x_j|^alpha by a plain double loop.
pub fn naive_distance_sum(m: usize, coords: &[f64], alpha: f64) -> f64 {
    let pts: Vec<&[f64]> = coords.chunks_exact(m).collect();
    let mut acc = 0.0;
    for p in &pts {
        for q in &pts {
            let r: f64 = p.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            acc += r.sqrt().powf(alpha);
        }
    }
    acc
}

/// Ordinary least-squares slope and its standard error.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, c)| (c - my - b * (a - mx)).powi(2))
        .sum();
    (b, (ssr / (n - 2.0) / sxx).sqrt())
}
