//! Special functions on S^d: normalized Gegenbauer (generalized Legendre)
//! polynomials, harmonic-space dimensions, cap measures, Laplace coefficients
//! of cap indicators, and certified truncation of their spectral series.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quad;

/// Slack allowed on |x| <= 1 before a Legendre argument is rejected.
const ARG_SLACK: f64 = 1e-12;

/// Dimension d of the sphere S^d (ambient space R^(d+1)).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct SphereDim(u32);

impl SphereDim {
    pub fn new(d: u32) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter(
                "sphere dimension must be at least 1".into(),
            ));
        }
        Ok(Self(d))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// Number of coordinates of a point, d + 1.
    pub fn ambient(self) -> usize {
        self.0 as usize + 1
    }

    pub(crate) fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// The sphere two dimensions up, whose zonal polynomials appear in the
    /// closed form of the Laplace coefficients.
    pub(crate) fn raised(self) -> Self {
        Self(self.0 + 2)
    }
}

impl TryFrom<u32> for SphereDim {
    type Error = Error;
    fn try_from(d: u32) -> Result<Self> {
        Self::new(d)
    }
}

impl From<SphereDim> for u32 {
    fn from(d: SphereDim) -> u32 {
        d.0
    }
}

impl fmt::Display for SphereDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S^{}", self.0)
    }
}

/// ∫_0^π sin(θ)^m dθ by the Wallis recursion.
pub(crate) fn sine_power_integral(m: u32) -> f64 {
    let (mut value, start) = if m % 2 == 0 { (PI, 0) } else { (2.0, 1) };
    let mut k = start + 2;
    while k <= m {
        value *= (k as f64 - 1.0) / k as f64;
        k += 2;
    }
    value
}

/// γ_d, the reciprocal of ∫_0^π sin(θ)^(d−1) dθ; equals Γ(d) / (2^(d−1) Γ(d/2)²).
pub fn gamma_d(dim: SphereDim) -> f64 {
    1.0 / sine_power_integral(dim.get() - 1)
}

/// Coefficients of the normalized three-term recurrence
/// (n+d−1) P_{n+1} = (2n+d−1) x P_n − n P_{n−1}, P_0 = 1, P_1 = x.
#[derive(Debug, Clone)]
pub struct LegendreRecurrence {
    dim: SphereDim,
    // index n holds the factors producing P_{n+1} from P_n and P_{n-1}
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl LegendreRecurrence {
    pub fn new(dim: SphereDim, max_degree: usize) -> Self {
        let d = dim.as_f64();
        let mut alpha = vec![0.0; max_degree.max(1)];
        let mut beta = vec![0.0; max_degree.max(1)];
        for n in 1..max_degree {
            let nf = n as f64;
            alpha[n] = (2.0 * nf + d - 1.0) / (nf + d - 1.0);
            beta[n] = nf / (nf + d - 1.0);
        }
        Self { dim, alpha, beta }
    }

    pub fn dim(&self) -> SphereDim {
        self.dim
    }

    pub fn max_degree(&self) -> usize {
        self.alpha.len()
    }

    /// Recurrence factors (α_n, β_n) with P_{n+1} = α_n x P_n − β_n P_{n−1}.
    pub fn coefficients(&self) -> (&[f64], &[f64]) {
        (&self.alpha, &self.beta)
    }

    /// Writes P_0(x), ..., P_{out.len()-1}(x) into `out`.
    pub fn fill(&self, x: f64, out: &mut [f64]) {
        assert!(out.len() <= self.max_degree() + 1);
        if out.is_empty() {
            return;
        }
        out[0] = 1.0;
        if out.len() == 1 {
            return;
        }
        out[1] = x;
        for n in 1..out.len() - 1 {
            out[n + 1] = self.alpha[n] * x * out[n] - self.beta[n] * out[n - 1];
        }
    }

    /// Calls `visit(n, P_n(x))` for n = 0..=max_degree without storing the sequence.
    #[inline]
    pub fn for_each(&self, x: f64, mut visit: impl FnMut(usize, f64)) {
        let mut prev = 1.0;
        let mut cur = x;
        visit(0, prev);
        if self.max_degree() == 0 {
            return;
        }
        visit(1, cur);
        for n in 1..self.max_degree() {
            let next = self.alpha[n] * x * cur - self.beta[n] * prev;
            prev = cur;
            cur = next;
            visit(n + 1, cur);
        }
    }
}

fn legendre_unchecked(dim: SphereDim, n: usize, x: f64) -> f64 {
    if dim.get() == 1 {
        return (n as f64 * x.acos()).cos();
    }
    match n {
        0 => 1.0,
        1 => x,
        _ => {
            let d = dim.as_f64();
            let (mut prev, mut cur) = (1.0, x);
            for k in 1..n {
                let kf = k as f64;
                let next = ((2.0 * kf + d - 1.0) * x * cur - kf * prev) / (kf + d - 1.0);
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Generalized Legendre polynomial P_n^(d)(x), normalized so P_n^(d)(1) = 1.
pub fn legendre_p(dim: SphereDim, n: usize, x: f64) -> Result<f64> {
    if !(x.abs() <= 1.0 + ARG_SLACK) {
        return Err(domain("x", x, "[-1, 1]"));
    }
    let x = x.clamp(-1.0, 1.0);
    if x == 1.0 {
        return Ok(1.0);
    }
    Ok(legendre_unchecked(dim, n, x).clamp(-1.0, 1.0))
}

/// Dimension Z(d, n) of the space of degree-n spherical harmonics on S^d.
pub fn zdim(dim: SphereDim, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let d = dim.get() as usize;
    if d == 1 {
        return 2.0;
    }
    // (2n+d-1)/(d-1) * binomial(n+d-2, d-2)
    let mut binom = 1.0;
    for k in 1..=(d - 2) {
        binom *= (n + k) as f64 / k as f64;
    }
    let z = (2 * n + d - 1) as f64 / (d - 1) as f64 * binom;
    if z < 9.0e15 {
        z.round()
    } else {
        z
    }
}

fn check_angle(phi: f64) -> Result<()> {
    if (0.0..=PI).contains(&phi) {
        Ok(())
    } else {
        Err(domain("phi", phi, "[0, pi]"))
    }
}

pub(crate) fn cap_measure_unchecked(dim: SphereDim, phi: f64) -> f64 {
    match dim.get() {
        1 => phi / PI,
        2 => {
            let h = (0.5 * phi).sin();
            h * h
        }
        d => {
            if phi > 0.5 * PI {
                return 1.0 - cap_measure_unchecked(dim, PI - phi);
            }
            let m = (d - 1) as i32;
            // ∫ sin^(d-1) is smooth, so the adaptive rule cannot fail here
            gamma_d(dim)
                * quad::integrate(|t: f64| t.sin().powi(m), 0.0, phi, quad::DEFAULT_REL_TOL)
                    .expect("smooth integrand")
        }
    }
}

/// Normalized surface measure σ(C(·, φ)) of a cap of opening angle φ.
pub fn cap_measure(dim: SphereDim, phi: f64) -> Result<f64> {
    check_angle(phi)?;
    Ok(cap_measure_unchecked(dim, phi))
}

/// Laplace coefficient a_n(φ) = (γ_d/d) sin(φ)^d P_{n−1}^(d+2)(cos φ) of the
/// cap indicator, n ≥ 1.
pub fn laplace_coeff(dim: SphereDim, n: usize, phi: f64) -> Result<f64> {
    check_angle(phi)?;
    if n == 0 {
        return Err(Error::InvalidParameter(
            "Laplace coefficients are defined for n >= 1".into(),
        ));
    }
    let s = phi.sin();
    let p = legendre_unchecked(dim.raised(), n - 1, phi.cos().clamp(-1.0, 1.0));
    Ok(gamma_d(dim) / dim.as_f64() * s.powi(dim.get() as i32) * p)
}

/// a_0(φ) = σ(C(·, φ)) followed by a_1(φ), ..., a_max(φ).
pub fn laplace_coeffs(dim: SphereDim, phi: f64, max_degree: usize) -> Result<Vec<f64>> {
    check_angle(phi)?;
    let mut out = vec![0.0; max_degree + 1];
    out[0] = cap_measure_unchecked(dim, phi);
    if max_degree == 0 {
        return Ok(out);
    }
    let scale = gamma_d(dim) / dim.as_f64() * phi.sin().powi(dim.get() as i32);
    let rec = LegendreRecurrence::new(dim.raised(), max_degree);
    let x = phi.cos();
    rec.for_each(x, |k, p| {
        if k < max_degree {
            out[k + 1] = scale * p;
        }
    });
    Ok(out)
}

/// Calibrates c_d in |P_n^(d)(cos φ)| ≤ min(1, c_d / (n sin φ)^((d−1)/2)).
///
/// Twice the largest observed value of (n sin φ)^((d−1)/2) |P_n^(d)(cos φ)|
/// over n ≤ 500 and a 1000-point grid of (0, π).
pub fn calibrate_gegenbauer_constant(dim: SphereDim) -> f64 {
    const DEGREES: usize = 500;
    const ANGLES: usize = 1000;
    let k = 0.5 * (dim.as_f64() - 1.0);
    let rec = LegendreRecurrence::new(dim, DEGREES);
    let mut worst: f64 = 0.0;
    for j in 0..ANGLES {
        let phi = PI * (j as f64 + 0.5) / ANGLES as f64;
        let s = phi.sin();
        rec.for_each(phi.cos(), |n, p| {
            if n >= 1 {
                worst = worst.max((n as f64 * s).powf(k) * p.abs());
            }
        });
    }
    2.0 * worst
}

const CACHED_DIMS: usize = 64;

/// Calibrated c_d, computed once per dimension.
pub fn gegenbauer_constant(dim: SphereDim) -> f64 {
    static CACHE: [OnceLock<f64>; CACHED_DIMS] = [const { OnceLock::new() }; CACHED_DIMS];
    match CACHE.get(dim.get() as usize) {
        Some(cell) => *cell.get_or_init(|| calibrate_gegenbauer_constant(dim)),
        None => calibrate_gegenbauer_constant(dim),
    }
}

/// Knobs for certified truncation of spectral series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationConfig {
    /// Largest harmonic degree any truncation may request.
    pub hard_cap: usize,
    /// Replacement values for c_d, keyed by the polynomial dimension d.
    #[serde(default)]
    pub gegenbauer_overrides: BTreeMap<u32, f64>,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self {
            hard_cap: 1 << 22,
            gegenbauer_overrides: BTreeMap::new(),
        }
    }
}

impl TruncationConfig {
    pub fn gegenbauer_constant(&self, dim: SphereDim) -> f64 {
        self.gegenbauer_overrides
            .get(&dim.get())
            .copied()
            .unwrap_or_else(|| gegenbauer_constant(dim))
    }
}

/// Maximum harmonic degree and a bound on everything dropped beyond it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesTruncation {
    pub max_degree: usize,
    pub tail_bound: f64,
}

/// Bounds on the tail of Σ_n a_n(φ)² Z(d,n) beyond degree m.
///
/// Returns (T_0, T_k) with T_0 ≥ Σ_{n>m} a_n² Z and T_k ≥ Σ_{n>m} a_n² Z n^(−k),
/// k = (d−1)/2, both from |P_{n−1}^(d+2)(cos φ)| ≤ c_{d+2} / ((n−1) sin φ)^((d+1)/2)
/// and Z(d,n) ≤ (d+1) n^(d−1).
pub fn laplace_tail_bounds(
    dim: SphereDim,
    phi: f64,
    m: usize,
    cfg: &TruncationConfig,
) -> (f64, f64) {
    let m = m.max(1) as f64;
    let d = dim.as_f64();
    let s = phi.sin().abs();
    if s == 0.0 {
        return (0.0, 0.0);
    }
    let c = cfg.gegenbauer_constant(dim.raised());
    let g = gamma_d(dim) / d;
    let amp = g * g * c * c * s.powf(d - 1.0) * (d + 1.0) * (1.0 + 1.0 / m).powf(d - 1.0);
    let k = 0.5 * (d - 1.0);
    let t0 = amp * (1.0 / m + 1.0 / (m * m));
    let tk = amp * (m.powf(-2.0 - k) + m.powf(-1.0 - k) / (1.0 + k));
    (t0, tk)
}

/// Smallest degree M whose crude tail bound N² Σ_{n>M} a_n(φ)² Z(d,n) is ≤ tol.
pub fn truncation_for_tolerance(
    dim: SphereDim,
    phi: f64,
    n_points: usize,
    tol: f64,
    cfg: &TruncationConfig,
) -> Result<SeriesTruncation> {
    check_angle(phi)?;
    if n_points == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(domain("tol", tol, "(0, inf]"));
    }
    let n2 = (n_points as f64).powi(2);
    let bound = |m: usize| n2 * laplace_tail_bounds(dim, phi, m, cfg).0;
    minimal_degree(bound, tol, cfg.hard_cap)
}

/// Smallest m ≥ 1 with `bound(m) <= tol`, for a bound that decreases in m.
pub(crate) fn minimal_degree(
    bound: impl Fn(usize) -> f64,
    tol: f64,
    hard_cap: usize,
) -> Result<SeriesTruncation> {
    if bound(1) <= tol {
        return Ok(SeriesTruncation {
            max_degree: 1,
            tail_bound: bound(1),
        });
    }
    let mut hi: u64 = 2;
    while bound(hi.min(usize::MAX as u64) as usize) > tol {
        if hi > hard_cap as u64 {
            // estimate the requirement for the error message
            let mut probe = hi;
            while probe < (1 << 62) && bound(probe as usize) > tol {
                probe *= 2;
            }
            return Err(Error::TruncationInfeasible {
                required: probe,
                cap: hard_cap,
            });
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if bound(mid as usize) <= tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let m = hi as usize;
    if m > hard_cap {
        return Err(Error::TruncationInfeasible {
            required: hi,
            cap: hard_cap,
        });
    }
    Ok(SeriesTruncation {
        max_degree: m,
        tail_bound: bound(m),
    })
}
