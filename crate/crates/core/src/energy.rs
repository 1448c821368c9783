//! Worst-case integration error in Sobolev spaces on S^d, the distance-kernel
//! invariance principle, and the L²-discrepancy of spherical caps.
//!
//! For the kernel K(x,y) = Σ_n b_n Z(d,n) P_n^(d)(⟨x,y⟩) the squared worst-case
//! error of equal-weight quadrature is (1/N²) Σ_{n≥1} b_n Z(d,n) W_n with
//! W_n the Weyl sums. For the distance kernels
//! K_α(x,y) = (γ_d/d)(M_α − |x−y|^α), 0 < α < 2, where M_α is the mean of
//! |x−y|^α, the same quantity has the closed form
//! (γ_d/d)(M_α − N^(−2) Σ_{i,j} |x_i − x_j|^α).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::pointset::{distance_power_sum, PointSet};
use crate::quad::{self, GaussLegendre};
use crate::specfun::{
    gamma_d, laplace_tail_bounds, sine_power_integral, LegendreRecurrence, SeriesTruncation,
    SphereDim, TruncationConfig,
};
use crate::sum::NeumaierSum;
use crate::tail::{PairSeries, PairTail};
use crate::variance::{variance_weights, weyl_sums, ZdimTable};

/// How the kernel coefficients b_n(s) are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientRule {
    /// b_n = (1 + n)^(−2s).
    Power,
    /// Coefficients of the kernel (γ_d/d)(M_α − |x−y|^α) with α = 2s − d;
    /// needs d/2 < s < d/2 + 1.
    Distance,
}

impl CoefficientRule {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Power => "power",
            Self::Distance => "distance",
        }
    }
}

/// Smoothness index and coefficient rule of a Sobolev reproducing kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevSpec {
    pub dim: SphereDim,
    pub s: f64,
    pub rule: CoefficientRule,
}

impl SobolevSpec {
    pub fn new(dim: SphereDim, s: f64, rule: CoefficientRule) -> Result<Self> {
        let half = 0.5 * dim.get() as f64;
        if !(s > half && s.is_finite()) {
            return Err(domain("s", s, "(d/2, inf)"));
        }
        if rule == CoefficientRule::Distance && !(s < half + 1.0) {
            return Err(domain("s", s, "(d/2, d/2 + 1) for the distance rule"));
        }
        Ok(Self { dim, s, rule })
    }

    /// Power rule.
    pub fn power(dim: SphereDim, s: f64) -> Result<Self> {
        Self::new(dim, s, CoefficientRule::Power)
    }

    fn alpha(&self) -> f64 {
        2.0 * self.s - self.dim.get() as f64
    }

    /// b_0, ..., b_m.
    pub fn coefficients(&self, m: usize) -> Vec<f64> {
        match self.rule {
            CoefficientRule::Power => (0..=m)
                .map(|n| (1.0 + n as f64).powf(-2.0 * self.s))
                .collect(),
            CoefficientRule::Distance => {
                let scale = gamma_d(self.dim) / self.dim.get() as f64;
                let mut c = distance_kernel_coefficients(self.dim, self.alpha(), m);
                c[0] = 1.0;
                for v in c.iter_mut().skip(1) {
                    *v = -scale * *v;
                }
                c
            }
        }
    }

    /// b_n Z(d,n) for n = 0..=m with index 0 zeroed.
    fn weights(&self, m: usize) -> Vec<f64> {
        let z = ZdimTable::new(self.dim);
        let mut w = self.coefficients(m);
        w[0] = 0.0;
        for (n, v) in w.iter_mut().enumerate().skip(1) {
            *v *= z.get(n);
        }
        w
    }

    /// Bounds on Σ_{n>m} b_n Z and Σ_{n>m} b_n Z n^(−k), k = (d−1)/2.
    fn tail_sums(&self, m: usize) -> (f64, f64) {
        let d = self.dim.get() as f64;
        let k = 0.5 * (d - 1.0);
        let mf = m.max(1) as f64;
        match self.rule {
            CoefficientRule::Power => {
                let e = 2.0 * self.s - d;
                let b0 = (d + 1.0) * mf.powf(-e) / e;
                let bk = (d + 1.0) * mf.powf(-e - k) / (e + k);
                (b0, bk)
            }
            CoefficientRule::Distance => {
                // b_n ≤ b_m ((m + a)/(n + a))^(d+α) for n ≥ m, a = d + α/2
                let alpha = self.alpha();
                let a = d + 0.5 * alpha;
                let bm = *self.coefficients(m.max(1)).last().expect("nonempty");
                let amp = bm * (mf + a).powf(d + alpha) * (d + 1.0);
                (amp * mf.powf(-alpha) / alpha, amp * mf.powf(-alpha - k) / (alpha + k))
            }
        }
    }

    /// Σ_{n≥1} b_n Z(d,n) when known exactly.
    fn total(&self) -> Option<f64> {
        match self.rule {
            CoefficientRule::Power => None,
            CoefficientRule::Distance => Some(
                gamma_d(self.dim) / self.dim.get() as f64
                    * mean_distance_power(self.dim, self.alpha()).ok()?,
            ),
        }
    }
}

/// Evaluation route of an [`EnergyReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyMethod {
    KernelSeries,
    DistanceClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub wce_squared: f64,
    pub method: EnergyMethod,
    pub s: f64,
    pub b_rule: CoefficientRule,
    pub max_degree: Option<usize>,
    pub tail_bound: Option<f64>,
}

impl EnergyReport {
    pub fn wce(&self) -> f64 {
        self.wce_squared.max(0.0).sqrt()
    }
}

/// (1/N²) Σ_{n=1}^{len−1} b_n Z(d,n) W_n for an explicit finite coefficient
/// list `b` (b[0] is ignored).
pub fn kernel_double_sum(x: &PointSet, b: &[f64]) -> f64 {
    if b.len() < 2 {
        return 0.0;
    }
    let m = b.len() - 1;
    let w = weyl_sums(x, m);
    let z = ZdimTable::new(x.dim());
    let mut acc = NeumaierSum::new();
    for n in 1..=m {
        acc.add(b[n] * z.get(n) * w[n]);
    }
    acc.value() / (x.len() as f64).powi(2)
}

/// Certified truncation of the kernel series for `x`.
fn series_truncation(
    x: &PointSet,
    tail: &PairTail,
    spec: &SobolevSpec,
    tol: f64,
    cfg: &TruncationConfig,
) -> Result<SeriesTruncation> {
    let n2 = (x.len() as f64).powi(2);
    let t = PairSeries {
        tail,
        weights: |m| spec.weights(m),
        tail_sums: |m| spec.tail_sums(m),
        total: spec.total(),
        gegenbauer: cfg.gegenbauer_constant(spec.dim),
        hard_cap: cfg.hard_cap,
    }
    .truncation(tol * n2)?;
    Ok(SeriesTruncation {
        max_degree: t.max_degree,
        tail_bound: t.tail_bound / n2,
    })
}

/// Squared worst-case error from the kernel series, truncated where the
/// certified tail drops below `tol`.
pub fn wce_squared(
    x: &PointSet,
    spec: &SobolevSpec,
    tol: f64,
    cfg: &TruncationConfig,
) -> Result<EnergyReport> {
    check_dim(x, spec.dim)?;
    let tail = PairTail::new(x);
    let t = series_truncation(x, &tail, spec, tol, cfg)?;
    Ok(series_report(x, spec, t, None))
}

fn series_report(
    x: &PointSet,
    spec: &SobolevSpec,
    t: SeriesTruncation,
    weyl: Option<&[f64]>,
) -> EnergyReport {
    let owned;
    let w = match weyl {
        Some(w) if w.len() > t.max_degree => w,
        _ => {
            owned = weyl_sums(x, t.max_degree);
            &owned
        }
    };
    let weights = spec.weights(t.max_degree);
    let mut acc = NeumaierSum::new();
    for n in 1..=t.max_degree {
        acc.add(weights[n] * w[n]);
    }
    EnergyReport {
        wce_squared: acc.value() / (x.len() as f64).powi(2),
        method: EnergyMethod::KernelSeries,
        s: spec.s,
        b_rule: spec.rule,
        max_degree: Some(t.max_degree),
        tail_bound: Some(t.tail_bound),
    }
}

/// Squared worst-case error with a tolerance relative to the result: the
/// degree doubles until the certified tail is at most `rel_tol` times the
/// truncated value.
pub fn wce_squared_relative(
    x: &PointSet,
    spec: &SobolevSpec,
    rel_tol: f64,
    cfg: &TruncationConfig,
) -> Result<EnergyReport> {
    check_dim(x, spec.dim)?;
    if !(rel_tol > 0.0) {
        return Err(domain("rel_tol", rel_tol, "(0, inf)"));
    }
    let tail = PairTail::new(x);
    let mut tol = 1e-2;
    loop {
        let t = series_truncation(x, &tail, spec, tol, cfg)?;
        let report = series_report(x, spec, t, None);
        if t.tail_bound <= rel_tol * report.wce_squared.abs() {
            return Ok(report);
        }
        // a coarse truncation can miss most of the value, so never shrink
        // the tolerance by more than a factor of 100 per round
        let target = 0.5 * rel_tol * report.wce_squared.abs();
        tol = target.clamp(tol * 1e-2, tol * 0.25);
    }
}

/// Kernel used for a strength fit at smoothness `s`: the distance rule on
/// (d/2, d/2 + 1), where it has a closed form, and the power rule above.
pub fn strength_spec(dim: SphereDim, s: f64) -> Result<SobolevSpec> {
    let half = 0.5 * dim.get() as f64;
    if s > half && s < half + 1.0 {
        SobolevSpec::new(dim, s, CoefficientRule::Distance)
    } else {
        SobolevSpec::power(dim, s)
    }
}

/// Squared worst-case error by the cheapest accurate route for `spec`: the
/// closed form for the distance rule, otherwise the kernel series with a
/// certified tail of at most 1% of the value.
pub fn wce_squared_auto(x: &PointSet, spec: &SobolevSpec, cfg: &TruncationConfig) -> Result<EnergyReport> {
    check_dim(x, spec.dim)?;
    match spec.rule {
        CoefficientRule::Distance => Ok(generalized_distance_report(x, spec.alpha(), spec.s)),
        CoefficientRule::Power => wce_squared_relative(x, spec, 1e-2, cfg),
    }
}

/// Expected squared worst-case error of N i.i.d. uniform points,
/// (1/N) Σ_{n≥1} b_n Z(d,n).
pub fn iid_expected_wce_squared(spec: &SobolevSpec, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("expected error needs N ≥ 1".into()));
    }
    let total = match spec.total() {
        Some(total) => total,
        None => {
            let mut m = 1024;
            loop {
                let w = spec.weights(m);
                let mut acc = NeumaierSum::new();
                w[1..].iter().for_each(|&v| acc.add(v));
                let (t0, _) = spec.tail_sums(m);
                if t0 <= 1e-12 * acc.value() || m >= 1 << 24 {
                    break acc.value() + 0.5 * t0;
                }
                m *= 4;
            }
        }
    };
    Ok(total / n as f64)
}

fn check_dim(x: &PointSet, dim: SphereDim) -> Result<()> {
    if x.dim() == dim {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "point set lives on S^{} but the kernel is for S^{dim}",
            x.dim()
        )))
    }
}

/// γ_d ∫_0^π (2 sin(θ/2))^α sin(θ)^(d−1) dθ, the mean of |x−y|^α.
pub fn mean_distance_power(dim: SphereDim, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(domain("alpha", alpha, "(0, inf)"));
    }
    static CACHE: OnceLock<Mutex<HashMap<(u32, u64), f64>>> = OnceLock::new();
    let key = (dim.get(), alpha.to_bits());
    let cache = CACHE.get_or_init(Default::default);
    if let Some(v) = cache.lock().expect("cache lock").get(&key) {
        return Ok(*v);
    }
    let m = (dim.get() - 1) as i32;
    // θ = π v⁴ flattens the θ^(α+d−1) behaviour at the origin
    let v = gamma_d(dim)
        * quad::integrate(
            |v: f64| {
                let t = PI * v.powi(4);
                (2.0 * (0.5 * t).sin()).powf(alpha) * t.sin().powi(m) * 4.0 * PI * v.powi(3)
            },
            0.0,
            1.0,
            quad::DEFAULT_REL_TOL,
        )?;
    cache.lock().expect("cache lock").insert(key, v);
    Ok(v)
}

/// Mean Euclidean distance between two independent uniform points of S^d.
pub fn mean_distance(dim: SphereDim) -> f64 {
    mean_distance_power(dim, 1.0).expect("alpha = 1 is valid")
}

/// Zonal coefficients c_0..c_m of |x−y|^α = Σ_n c_n Z(d,n) P_n^(d)(⟨x,y⟩),
/// 0 < α < 2, from c_0 = M_α and c_{n+1} = c_n (n − α/2)/(n + d + α/2).
pub fn distance_kernel_coefficients(dim: SphereDim, alpha: f64, m: usize) -> Vec<f64> {
    static CACHE: OnceLock<Mutex<HashMap<(u32, u64), Arc<Vec<f64>>>>> = OnceLock::new();
    let key = (dim.get(), alpha.to_bits());
    let cache = CACHE.get_or_init(Default::default);
    if let Some(v) = cache.lock().expect("cache lock").get(&key) {
        if v.len() > m {
            return v[..=m].to_vec();
        }
    }
    let d = dim.get() as f64;
    let mut c = Vec::with_capacity(m + 1);
    c.push(mean_distance_power(dim, alpha).expect("validated exponent"));
    for n in 0..m {
        let nf = n as f64;
        c.push(c[n] * (nf - 0.5 * alpha) / (nf + d + 0.5 * alpha));
    }
    cache
        .lock()
        .expect("cache lock")
        .insert(key, Arc::new(c.clone()));
    c
}

/// Coefficients c_0..c_m of |x−y|^α by Gauss–Legendre projection onto
/// P_n^(d), using 4m + 64 nodes in v with θ = π v².
pub fn project_distance_power(dim: SphereDim, alpha: f64, m: usize) -> Vec<f64> {
    let rule = GaussLegendre::new(4 * m + 64);
    let rec = LegendreRecurrence::new(dim, m.max(1));
    let g = gamma_d(dim);
    let e = (dim.get() - 1) as i32;
    let mut acc = vec![NeumaierSum::new(); m + 1];
    for (v, w) in rule.mapped(0.0, 1.0) {
        let theta = PI * v * v;
        let f = g * w * (2.0 * (0.5 * theta).sin()).powf(alpha) * theta.sin().powi(e) * 2.0 * PI * v;
        rec.for_each(theta.cos(), |n, p| {
            if n <= m {
                acc[n].add(f * p);
            }
        });
    }
    acc.iter().map(|a| a.value()).collect()
}

/// Closed-form squared worst-case error for the kernel 1 − (γ_d/d)|x−y|
/// (smoothness (d+1)/2).
pub fn wce_distance_kernel(x: &PointSet) -> EnergyReport {
    generalized_distance_report(x, 1.0, 0.5 * (x.dim().get() as f64 + 1.0))
}

/// Closed-form squared worst-case error for the distance rule at smoothness
/// s ∈ (d/2, d/2 + 1).
pub fn wce_generalized_distance(x: &PointSet, s: f64) -> Result<EnergyReport> {
    let spec = SobolevSpec::new(x.dim(), s, CoefficientRule::Distance)?;
    Ok(generalized_distance_report(x, spec.alpha(), s))
}

fn generalized_distance_report(x: &PointSet, alpha: f64, s: f64) -> EnergyReport {
    let dim = x.dim();
    let n2 = (x.len() as f64).powi(2);
    let sum = distance_power_sum(x.coords(), dim.ambient(), alpha);
    let mean = mean_distance_power(dim, alpha).expect("alpha in (0, 2)");
    EnergyReport {
        wce_squared: gamma_d(dim) / dim.get() as f64 * (mean - sum / n2),
        method: EnergyMethod::DistanceClosedForm,
        s,
        b_rule: CoefficientRule::Distance,
        max_degree: None,
        tail_bound: None,
    }
}

/// Residual of Stolarsky's identity with the kernel-series worst-case error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StolarskyCheck {
    pub residual: f64,
    /// Bound on the residual caused by truncating the series, already scaled
    /// by d/γ_d.
    pub tail_bound: f64,
    pub max_degree: usize,
}

/// N^(−2) Σ|x_i − x_j| + (d/γ_d) wce² − mean distance, where wce² comes from
/// the series over the exact distance-kernel coefficients truncated so that
/// the residual's tail contribution is ≤ tol.
pub fn stolarsky_residual(x: &PointSet, tol: f64, cfg: &TruncationConfig) -> Result<StolarskyCheck> {
    let dim = x.dim();
    let spec = SobolevSpec::new(dim, 0.5 * (dim.get() as f64 + 1.0), CoefficientRule::Distance)?;
    let factor = dim.get() as f64 / gamma_d(dim);
    let tail = PairTail::new(x);
    let t = series_truncation(x, &tail, &spec, tol / factor, cfg)?;
    let report = series_report(x, &spec, t, None);
    let n2 = (x.len() as f64).powi(2);
    let sum = distance_power_sum(x.coords(), dim.ambient(), 1.0);
    Ok(StolarskyCheck {
        residual: sum / n2 + factor * report.wce_squared - mean_distance(dim),
        tail_bound: factor * t.tail_bound,
        max_degree: t.max_degree,
    })
}

/// The same residual with the closed-form worst-case error; zero up to
/// rounding.
pub fn stolarsky_residual_closed_form(x: &PointSet) -> f64 {
    let dim = x.dim();
    let n2 = (x.len() as f64).powi(2);
    let sum = distance_power_sum(x.coords(), dim.ambient(), 1.0);
    let wce2 = wce_distance_kernel(x).wce_squared;
    sum / n2 + dim.get() as f64 / gamma_d(dim) * wce2 - mean_distance(dim)
}

/// L²-discrepancy of spherical caps computed two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Discrepancy {
    /// (∫_0^π V(X, φ) sin φ dφ)^(1/2) from quadrature over φ.
    pub value: f64,
    /// D² from the quadrature route.
    pub squared: f64,
    /// D² from Σ_n A_n Z(d,n) W_n.
    pub series_squared: f64,
    /// Bound on the truncation error of the squared discrepancy.
    pub tail_bound: f64,
    pub max_degree: usize,
    pub quad_points: usize,
}

/// A_n = ∫_0^π a_n(φ)² sin φ dφ for n = 0..=m (index 0 zeroed), by
/// Gauss–Legendre in cos φ. In that variable a_n² is a polynomial of degree
/// 2n + 2d − 2, so m + d + 1 nodes integrate every term exactly.
pub fn discrepancy_coefficients(dim: SphereDim, m: usize) -> Vec<f64> {
    let rule = GaussLegendre::new(m + dim.get() as usize + 1);
    let mut acc = vec![NeumaierSum::new(); m + 1];
    for (c, w) in rule.mapped(-1.0, 1.0) {
        let phi = c.clamp(-1.0, 1.0).acos();
        let a = crate::specfun::laplace_coeffs(dim, phi, m).expect("phi in [0, pi]");
        for n in 1..=m {
            acc[n].add(w * a[n] * a[n]);
        }
    }
    acc.iter().map(|a| a.value()).collect()
}

/// L²-discrepancy of `x`. The degree M is chosen so that the certified tail
/// of D² is ≤ tol. The first route integrates the truncated variance with a
/// `quad_points`-node Gauss–Legendre rule in cos φ; the second sums
/// A_n Z(d,n) W_n. The routes must agree within tol, which requires
/// quad_points ≥ M + d + 1.
pub fn l2_discrepancy(
    x: &PointSet,
    quad_points: usize,
    tol: f64,
    cfg: &TruncationConfig,
) -> Result<L2Discrepancy> {
    if quad_points < 8 {
        return Err(Error::InvalidParameter("quad_points must be at least 8".into()));
    }
    let dim = x.dim();
    let tail = PairTail::new(x);
    let z = ZdimTable::new(dim);
    let scale = gamma_d(dim) / dim.get() as f64;
    // the degree search runs on the product form of A_n, which equals the
    // quadrature values; the quadrature itself is done once at the final degree
    let search_weights = |m: usize| {
        let mut c = distance_kernel_coefficients(dim, 1.0, m);
        c[0] = 0.0;
        for (n, v) in c.iter_mut().enumerate().skip(1) {
            *v *= -scale * z.get(n);
        }
        c
    };
    let full = sine_power_integral(dim.get());
    // a_n² Z tails scale with sin^(d−1) φ, so their sin-weighted integrals
    // pick up ∫ sin^d
    let tail_sums = |m: usize| {
        let (t0, tk) = laplace_tail_bounds(dim, 0.5 * PI, m, cfg);
        (t0 * full, tk * full)
    };
    let total = quad::integrate(
        |phi: f64| {
            let s = crate::specfun::cap_measure_unchecked(dim, phi);
            s * (1.0 - s) * phi.sin()
        },
        0.0,
        PI,
        quad::DEFAULT_REL_TOL,
    )?;
    let t = PairSeries {
        tail: &tail,
        weights: search_weights,
        tail_sums,
        total: Some(total),
        gegenbauer: cfg.gegenbauer_constant(dim),
        hard_cap: cfg.hard_cap,
    }
    .truncation(tol)?;
    let m = t.max_degree;
    let w = weyl_sums(x, m);
    let mut a = discrepancy_coefficients(dim, m);
    for (n, v) in a.iter_mut().enumerate().skip(1) {
        *v *= z.get(n);
    }
    let mut series = NeumaierSum::new();
    for n in 1..=m {
        series.add(a[n] * w[n]);
    }
    let series = series.value();
    let rule = GaussLegendre::new(quad_points);
    let mut integral = NeumaierSum::new();
    for (c, wq) in rule.mapped(-1.0, 1.0) {
        let phi = c.clamp(-1.0, 1.0).acos();
        let weights = variance_weights(dim, phi, m);
        let mut v = NeumaierSum::new();
        for n in 1..=m {
            v.add(weights[n] * w[n]);
        }
        integral.add(wq * v.value());
    }
    let integral = integral.value();
    if (integral - series).abs() > tol {
        return Err(Error::QuadratureNotConverged(format!(
            "L2 discrepancy routes differ by {:e} with {quad_points} nodes at degree {m}; \
             use at least {} nodes",
            (integral - series).abs(),
            m + dim.get() as usize + 1
        )));
    }
    Ok(L2Discrepancy {
        value: integral.max(0.0).sqrt(),
        squared: integral,
        series_squared: series,
        tail_bound: t.tail_bound,
        max_degree: m,
        quad_points,
    })
}

/// L²-discrepancy from the sum of distances:
/// D² = (γ_d/d)(N² · mean distance − Σ_{i,j} |x_i − x_j|).
pub fn l2_discrepancy_distance(x: &PointSet) -> f64 {
    let n2 = (x.len() as f64).powi(2);
    (n2 * wce_distance_kernel(x).wce_squared).max(0.0).sqrt()
}

/// Smallest C with a_n(φ)² ≤ C sin(φ)^(d−1) b_n for the distance kernel of
/// smoothness (d+1)/2, over n ≤ 2000 and a grid of (0, π/2), times 1.05.
/// Since every Weyl sum is nonnegative this gives
/// V(X, φ) ≤ C sin(φ)^(d−1) N² wce²(X).
pub fn calibrate_lemma_constant(dim: SphereDim) -> f64 {
    const DEGREES: usize = 2000;
    const ANGLES: usize = 2000;
    let scale = gamma_d(dim) / dim.get() as f64;
    let c = distance_kernel_coefficients(dim, 1.0, DEGREES);
    let e = dim.get() as f64 - 1.0;
    let mut worst: f64 = 0.0;
    for j in 1..ANGLES {
        let phi = 0.5 * PI * j as f64 / ANGLES as f64;
        let a = crate::specfun::laplace_coeffs(dim, phi, DEGREES).expect("phi in range");
        let s = phi.sin().powf(e);
        for n in 1..=DEGREES {
            let b = -scale * c[n];
            worst = worst.max(a[n] * a[n] / (s * b));
        }
    }
    1.05 * worst
}

/// Cached [`calibrate_lemma_constant`].
pub fn lemma_constant(dim: SphereDim) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<u32, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(v) = cache.lock().expect("cache lock").get(&dim.get()) {
        return *v;
    }
    let v = calibrate_lemma_constant(dim);
    *cache.lock().expect("cache lock").entry(dim.get()).or_insert(v)
}
