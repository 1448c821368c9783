//! Diagnostics for sequences of point sets with growing N: the spherical
//! structure factor, finite-N tests for the large, small and threshold cap
//! regimes of hyperuniformity, Weyl-sum decay and empirical strength.
//!
//! Every test fits a straight line on log-log axes and compares the slope,
//! with a margin of a few standard errors, against the exponent separating
//! hyperuniform from Poisson-like behavior. These are heuristics for finite
//! N; the margins are collected in [`VerdictRules`] and echoed in every
//! report.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::energy::{iid_expected_wce_squared, strength_spec, wce_squared_auto, SobolevSpec};
use crate::error::{domain, Error, Result};
use crate::pointset::{random_uniform, PointSet};
use crate::regression::{fit_line, LinearFit};
use crate::specfun::{cap_measure, SphereDim, TruncationConfig};
use crate::variance::{iid_variance, number_variance_pair_kernel, weyl_sums};

/// Fewest sets for which any regime verdict is attempted.
pub const MIN_SETS: usize = 4;
/// Fewest i.i.d. replicas averaged per size.
pub const MIN_REPLICAS: usize = 100;
const CLAMP: f64 = 1e-12;

/// Point sets X_N with strictly increasing N on a common sphere.
#[derive(Debug, Clone)]
pub struct PointSetSequence {
    family: String,
    members: Vec<PointSet>,
}

impl PointSetSequence {
    pub fn new(family: impl Into<String>, members: Vec<PointSet>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::Sequence("no point sets given".into()));
        };
        let dim = first.dim();
        if let Some(x) = members.iter().find(|x| x.dim() != dim) {
            return Err(Error::Sequence(format!(
                "mixed dimensions: S^{dim} and S^{}",
                x.dim()
            )));
        }
        check_sizes(&members.iter().map(PointSet::len).collect::<Vec<_>>())?;
        Ok(Self {
            family: family.into(),
            members,
        })
    }

    pub fn family(&self) -> &str {
        &self.family
    }

    pub fn members(&self) -> &[PointSet] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::Sequence("no sizes given".into()));
    }
    if sizes[0] == 0 {
        return Err(Error::Sequence("sizes must be positive".into()));
    }
    if let Some(w) = sizes.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::Sequence(format!(
            "sizes must increase strictly, found {} then {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Anything that can supply per-member number variances, Weyl sums and
/// worst-case errors along a sequence of sizes.
pub trait SequenceSource: Sync {
    fn family(&self) -> &str;
    fn dim(&self) -> SphereDim;
    fn sizes(&self) -> Vec<usize>;
    /// V(X_N, φ) for member `member` at each angle.
    fn variances(&self, member: usize, phis: &[f64]) -> Result<Vec<f64>>;
    /// W_0, ..., W_max_degree for member `member`.
    fn weyl_sums(&self, member: usize, max_degree: usize) -> Result<Vec<f64>>;
    /// Squared worst-case error of member `member`.
    fn wce_squared(&self, member: usize, spec: &SobolevSpec) -> Result<f64>;
    /// Description embedded in reports.
    fn describe(&self) -> Value;
}

impl SequenceSource for PointSetSequence {
    fn family(&self) -> &str {
        &self.family
    }

    fn dim(&self) -> SphereDim {
        self.members[0].dim()
    }

    fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(PointSet::len).collect()
    }

    fn variances(&self, member: usize, phis: &[f64]) -> Result<Vec<f64>> {
        number_variance_pair_kernel(&self.members[member], phis)
    }

    fn weyl_sums(&self, member: usize, max_degree: usize) -> Result<Vec<f64>> {
        Ok(weyl_sums(&self.members[member], max_degree))
    }

    fn wce_squared(&self, member: usize, spec: &SobolevSpec) -> Result<f64> {
        Ok(wce_squared_auto(&self.members[member], spec, &TruncationConfig::default())?.wce_squared)
    }

    fn describe(&self) -> Value {
        json!({
            "source": "point-sets",
            "family": self.family,
            "sizes": self.sizes(),
            "provenance": self.members.iter().map(PointSet::provenance).collect::<Vec<_>>(),
        })
    }
}

/// I.i.d. uniform point sets, every quantity averaged over `replicas`
/// independent draws per size. Draws are generated on demand from
/// [`IidEnsemble::replica_seed`].
#[derive(Debug, Clone)]
pub struct IidEnsemble {
    dim: SphereDim,
    sizes: Vec<usize>,
    replicas: usize,
    seed: u64,
}

impl IidEnsemble {
    pub fn new(dim: SphereDim, sizes: Vec<usize>, replicas: usize, seed: u64) -> Result<Self> {
        check_sizes(&sizes)?;
        if replicas < MIN_REPLICAS {
            return Err(Error::InvalidParameter(format!(
                "i.i.d. averages need at least {MIN_REPLICAS} replicas, got {replicas}"
            )));
        }
        if sizes.iter().any(|&n| n > u32::MAX as usize) || replicas > u32::MAX as usize {
            return Err(Error::InvalidParameter("sizes and replicas must fit in 32 bits".into()));
        }
        Ok(Self {
            dim,
            sizes,
            replicas,
            seed,
        })
    }

    pub fn replicas(&self) -> usize {
        self.replicas
    }

    /// Seed of replica `r` of member `member`.
    pub fn replica_seed(&self, member: usize, r: usize) -> u64 {
        self.seed
            .wrapping_add((member as u64) << 32)
            .wrapping_add(r as u64)
    }

    pub fn replica(&self, member: usize, r: usize) -> Result<PointSet> {
        random_uniform(self.dim, self.sizes[member], self.replica_seed(member, r))
    }

    fn average<F>(&self, member: usize, f: F) -> Result<Vec<f64>>
    where
        F: Fn(&PointSet) -> Result<Vec<f64>> + Sync,
    {
        let draws: Vec<Vec<f64>> = (0..self.replicas)
            .into_par_iter()
            .map(|r| f(&self.replica(member, r)?))
            .collect::<Result<_>>()?;
        let mut mean = vec![0.0; draws[0].len()];
        for d in &draws {
            for (m, v) in mean.iter_mut().zip(d) {
                *m += v;
            }
        }
        let r = self.replicas as f64;
        Ok(mean.into_iter().map(|m| m / r).collect())
    }
}

impl SequenceSource for IidEnsemble {
    fn family(&self) -> &str {
        "iid-ensemble"
    }

    fn dim(&self) -> SphereDim {
        self.dim
    }

    fn sizes(&self) -> Vec<usize> {
        self.sizes.clone()
    }

    fn variances(&self, member: usize, phis: &[f64]) -> Result<Vec<f64>> {
        self.average(member, |x| number_variance_pair_kernel(x, phis))
    }

    fn weyl_sums(&self, member: usize, max_degree: usize) -> Result<Vec<f64>> {
        self.average(member, |x| Ok(weyl_sums(x, max_degree)))
    }

    fn wce_squared(&self, member: usize, spec: &SobolevSpec) -> Result<f64> {
        let cfg = TruncationConfig::default();
        Ok(self.average(member, |x| Ok(vec![wce_squared_auto(x, spec, &cfg)?.wce_squared]))?[0])
    }

    fn describe(&self) -> Value {
        json!({
            "source": "iid-ensemble",
            "dim": self.dim.get(),
            "sizes": self.sizes,
            "replicas": self.replicas,
            "seed": self.seed,
        })
    }
}

/// Exact expectations for i.i.d. uniform points: V = N σ (1 − σ),
/// E W_n = N for n ≥ 1 and E wce² = (1/N) Σ_{n≥1} b_n Z(d,n).
#[derive(Debug, Clone)]
pub struct IidExpectation {
    dim: SphereDim,
    sizes: Vec<usize>,
}

impl IidExpectation {
    pub fn new(dim: SphereDim, sizes: Vec<usize>) -> Result<Self> {
        check_sizes(&sizes)?;
        Ok(Self { dim, sizes })
    }
}

impl SequenceSource for IidExpectation {
    fn family(&self) -> &str {
        "iid-expectation"
    }

    fn dim(&self) -> SphereDim {
        self.dim
    }

    fn sizes(&self) -> Vec<usize> {
        self.sizes.clone()
    }

    fn variances(&self, member: usize, phis: &[f64]) -> Result<Vec<f64>> {
        phis.iter()
            .map(|&phi| iid_variance(self.dim, self.sizes[member], phi))
            .collect()
    }

    fn weyl_sums(&self, member: usize, max_degree: usize) -> Result<Vec<f64>> {
        let n = self.sizes[member] as f64;
        let mut w = vec![n; max_degree + 1];
        w[0] = n * n;
        Ok(w)
    }

    fn wce_squared(&self, member: usize, spec: &SobolevSpec) -> Result<f64> {
        iid_expected_wce_squared(spec, self.sizes[member])
    }

    fn describe(&self) -> Value {
        json!({
            "source": "iid-expectation",
            "dim": self.dim.get(),
            "sizes": self.sizes,
        })
    }
}

fn per_member<T, F>(members: std::ops::Range<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    members.into_par_iter().map(&f).collect()
}

fn clamped_ln(v: f64, scale: f64) -> f64 {
    v.max(CLAMP * scale).ln()
}

/// Trend of a sequence of values against log N.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Flat,
    Increasing,
    Decreasing,
    Inconclusive,
}

/// (1/N) W_n along a sequence with an estimate of its limit s(n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureFactor {
    pub n: usize,
    pub sizes: Vec<usize>,
    pub values: Vec<f64>,
    /// Mean over the last third of the sequence.
    pub limit: f64,
    /// Standard error of that mean; `None` when it covers a single value.
    pub limit_stderr: Option<f64>,
    /// Sign of the fitted slope of the values against log N, when it is
    /// more than two standard errors from zero.
    pub trend: Trend,
}

pub fn structure_factor(src: &dyn SequenceSource, n: usize) -> Result<StructureFactor> {
    if n == 0 {
        return Err(Error::InvalidParameter("structure factor degree must be ≥ 1".into()));
    }
    let sizes = src.sizes();
    let values: Vec<f64> = per_member(0..sizes.len(), |k| {
        Ok(src.weyl_sums(k, n)?[n] / sizes[k] as f64)
    })?;
    let tail = &values[values.len() - values.len().div_ceil(3)..];
    let k = tail.len() as f64;
    let limit = tail.iter().sum::<f64>() / k;
    let limit_stderr = (tail.len() > 1).then(|| {
        let var = tail.iter().map(|v| (v - limit).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    });
    let ln_n: Vec<f64> = sizes.iter().map(|&s| (s as f64).ln()).collect();
    let trend = match fit_line(&ln_n, &values) {
        Some(LinearFit {
            slope,
            stderr: Some(se),
            ..
        }) => {
            if slope.abs() <= 2.0 * se {
                Trend::Flat
            } else if slope > 0.0 {
                Trend::Increasing
            } else {
                Trend::Decreasing
            }
        }
        _ => Trend::Inconclusive,
    };
    Ok(StructureFactor {
        n,
        sizes,
        values,
        limit,
        limit_stderr,
        trend,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Large,
    Small,
    Threshold,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Large => "large",
            Self::Small => "small",
            Self::Threshold => "threshold",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

/// Margins turning fitted slopes into verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerdictRules {
    /// Multiple of the slope's standard error added before comparing.
    pub se_multiplier: f64,
    /// Slack on the threshold exponent above d − 1.
    pub threshold_slack: f64,
    /// Large-cap slopes must stay below 1 − guard; exact i.i.d. expectations
    /// have slope 1 up to rounding.
    pub large_cap_guard: f64,
}

impl Default for VerdictRules {
    fn default() -> Self {
        Self {
            se_multiplier: 2.0,
            threshold_slack: 0.3,
            large_cap_guard: 1e-9,
        }
    }
}

/// Fitted exponent for one grid parameter (φ, t or s); `param` is absent
/// for regimes with a single fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponent {
    pub param: Option<f64>,
    pub slope: f64,
    pub stderr: Option<f64>,
    pub points: usize,
}

impl Exponent {
    fn from_fit(param: Option<f64>, fit: Option<LinearFit>, points: usize) -> Self {
        match fit {
            Some(f) => Self {
                param,
                slope: f.slope,
                stderr: f.stderr,
                points,
            },
            None => Self {
                param,
                slope: f64::NAN,
                stderr: None,
                points,
            },
        }
    }

    /// slope + z · stderr, or `None` if either is unavailable.
    fn upper(&self, z: f64) -> Option<f64> {
        let u = self.slope + z * self.stderr?;
        u.is_finite().then_some(u)
    }
}

/// Per-member diagnostic: `value` is the measured number variance at
/// `angle`, `normalized` its regime-specific rescaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub n_points: usize,
    pub param: f64,
    pub angle: f64,
    pub value: f64,
    pub normalized: f64,
}

/// One regression input (x, y) for the fit of parameter `param`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub param: Option<f64>,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub verdict: Verdict,
    pub family: String,
    pub dim: u32,
    pub sizes: Vec<usize>,
    pub exponents: Vec<Exponent>,
    pub table: Vec<TableRow>,
    pub fit_points: Vec<FitPoint>,
    pub config: Value,
}

/// φ = kπ/18 for k = 1..8.
pub fn default_phi_grid() -> Vec<f64> {
    (1..=8).map(|k| k as f64 * PI / 18.0).collect()
}

/// Twelve geometrically spaced values from 1/2 to 16.
pub fn default_t_grid() -> Vec<f64> {
    (0..12)
        .map(|k| 0.5 * 32f64.powf(k as f64 / 11.0))
        .collect()
}

fn check_increasing(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter(format!(
            "{name} grid must increase strictly"
        )));
    }
    Ok(())
}

/// Fits log V(X_N, φ) = α log N + c for each φ; `consistent` iff
/// max_φ (α + z·SE) < 1 − guard.
pub fn classify_large_caps(
    src: &dyn SequenceSource,
    phi_grid: &[f64],
    rules: &VerdictRules,
) -> Result<RegimeReport> {
    check_increasing("phi", phi_grid)?;
    for &phi in phi_grid {
        if !(phi > 0.0 && phi < 0.5 * PI) {
            return Err(domain("phi", phi, "(0, pi/2)"));
        }
    }
    let sizes = src.sizes();
    let v = per_member(0..sizes.len(), |k| src.variances(k, phi_grid))?;
    let ln_n: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let mut table = Vec::new();
    for (k, &n) in sizes.iter().enumerate() {
        for (j, &phi) in phi_grid.iter().enumerate() {
            table.push(TableRow {
                n_points: n,
                param: phi,
                angle: phi,
                value: v[k][j],
                normalized: v[k][j] / n as f64,
            });
        }
    }
    let mut exponents = Vec::new();
    let mut fit_points = Vec::new();
    for (j, &phi) in phi_grid.iter().enumerate() {
        let y: Vec<f64> = (0..sizes.len())
            .map(|k| clamped_ln(v[k][j], sizes[k] as f64))
            .collect();
        for (&x, &y) in ln_n.iter().zip(&y) {
            fit_points.push(FitPoint {
                param: Some(phi),
                x,
                y,
            });
        }
        exponents.push(Exponent::from_fit(Some(phi), fit_line(&ln_n, &y), y.len()));
    }
    let verdict = if sizes.len() < MIN_SETS {
        Verdict::Inconclusive
    } else {
        match max_upper(&exponents, rules.se_multiplier) {
            None => Verdict::Inconclusive,
            Some(u) if u < 1.0 - rules.large_cap_guard => Verdict::Consistent,
            Some(_) => Verdict::Inconsistent,
        }
    };
    Ok(RegimeReport {
        regime: Regime::Large,
        verdict,
        family: src.family().to_string(),
        dim: src.dim().get(),
        sizes,
        exponents,
        table,
        fit_points,
        config: json!({
            "phi_grid": phi_grid,
            "rules": rules,
            "source": src.describe(),
        }),
    })
}

fn max_upper(exponents: &[Exponent], z: f64) -> Option<f64> {
    exponents
        .iter()
        .map(|e| e.upper(z))
        .try_fold(f64::NEG_INFINITY, |acc, u| Some(acc.max(u?)))
}

/// Growth rule w(N) for small caps φ_N = N^(−1/d) w(N).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum WindowRule {
    /// w(N) = scale · ln N.
    Log { scale: f64 },
    /// w(N) = scale · N^exponent.
    Power { scale: f64, exponent: f64 },
}

impl Default for WindowRule {
    fn default() -> Self {
        Self::Log { scale: 4.0 }
    }
}

impl WindowRule {
    pub fn eval(&self, n: usize) -> f64 {
        let n = n as f64;
        match *self {
            Self::Log { scale } => scale * n.ln(),
            Self::Power { scale, exponent } => scale * n.powf(exponent),
        }
    }

    /// Cap angles φ_N, after checking numerically that w(N) increases,
    /// w(N) N^(−1/d) decreases and every φ_N lies in (0, π).
    pub fn angles(&self, dim: SphereDim, sizes: &[usize]) -> Result<Vec<f64>> {
        let inv_d = 1.0 / dim.get() as f64;
        let w: Vec<f64> = sizes.iter().map(|&n| self.eval(n)).collect();
        let phi: Vec<f64> = sizes
            .iter()
            .zip(&w)
            .map(|(&n, &w)| w * (n as f64).powf(-inv_d))
            .collect();
        let bad = |msg: &str| Err(Error::InvalidParameter(format!("window rule {self:?}: {msg}")));
        if let Some(&p) = phi.iter().find(|&&p| !(p > 0.0 && p < PI)) {
            return bad(&format!("cap angle {p} is outside (0, pi)"));
        }
        if w.windows(2).any(|p| !(p[0] < p[1])) {
            return bad("w(N) does not increase on the tested sizes");
        }
        if phi.windows(2).any(|p| !(p[0] > p[1])) {
            return bad("w(N) N^(-1/d) does not decrease on the tested sizes");
        }
        Ok(phi)
    }
}

/// Fits log[V(X_N, φ_N) / (N σ(φ_N))] against log N; `consistent` iff
/// slope + z·SE < 0.
pub fn classify_small_caps(
    src: &dyn SequenceSource,
    rule: &WindowRule,
    rules: &VerdictRules,
) -> Result<RegimeReport> {
    let dim = src.dim();
    let sizes = src.sizes();
    let phi = rule.angles(dim, &sizes)?;
    let v = per_member(0..sizes.len(), |k| Ok(src.variances(k, &phi[k..=k])?[0]))?;
    let ln_n: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let mut table = Vec::new();
    let mut y = Vec::new();
    for (k, &n) in sizes.iter().enumerate() {
        let ratio = v[k] / (n as f64 * cap_measure(dim, phi[k])?);
        table.push(TableRow {
            n_points: n,
            param: rule.eval(n),
            angle: phi[k],
            value: v[k],
            normalized: ratio,
        });
        y.push(clamped_ln(ratio, 1.0));
    }
    let fit_points = ln_n
        .iter()
        .zip(&y)
        .map(|(&x, &y)| FitPoint { param: None, x, y })
        .collect();
    let exponent = Exponent::from_fit(None, fit_line(&ln_n, &y), y.len());
    let verdict = if sizes.len() < MIN_SETS {
        Verdict::Inconclusive
    } else {
        match exponent.upper(rules.se_multiplier) {
            None => Verdict::Inconclusive,
            Some(u) if u < 0.0 => Verdict::Consistent,
            Some(_) => Verdict::Inconsistent,
        }
    };
    Ok(RegimeReport {
        regime: Regime::Small,
        verdict,
        family: src.family().to_string(),
        dim: dim.get(),
        sizes,
        exponents: vec![exponent],
        table,
        fit_points,
        config: json!({
            "window_rule": rule,
            "rules": rules,
            "source": src.describe(),
        }),
    })
}

/// V_sup(t) = max of V(X_N, t N^(−1/d)) over the last half of the sequence,
/// fitted as log V_sup = β log t + c over the upper half of the t grid;
/// `consistent` iff β ≤ (d − 1) + slack + z·SE.
pub fn classify_threshold(
    src: &dyn SequenceSource,
    t_grid: &[f64],
    rules: &VerdictRules,
) -> Result<RegimeReport> {
    check_increasing("t", t_grid)?;
    if !(t_grid[0] > 0.0) {
        return Err(domain("t", t_grid[0], "(0, inf)"));
    }
    let dim = src.dim();
    let d = dim.get() as f64;
    let sizes = src.sizes();
    let t_max = *t_grid.last().expect("nonempty");
    let phi_max = t_max * (sizes[0] as f64).powf(-1.0 / d);
    if !(phi_max < PI) {
        return Err(Error::InvalidParameter(format!(
            "t = {t_max} gives cap angle {phi_max} ≥ pi for N = {}",
            sizes[0]
        )));
    }
    let first = sizes.len() / 2;
    let angles = |k: usize| -> Vec<f64> {
        let scale = (sizes[k] as f64).powf(-1.0 / d);
        t_grid.iter().map(|t| t * scale).collect()
    };
    let v = per_member(first..sizes.len(), |k| src.variances(k, &angles(k)))?;
    let mut table = Vec::new();
    let mut v_sup = vec![f64::NEG_INFINITY; t_grid.len()];
    for (row, k) in v.iter().zip(first..) {
        for (j, (&t, phi)) in t_grid.iter().zip(angles(k)).enumerate() {
            table.push(TableRow {
                n_points: sizes[k],
                param: t,
                angle: phi,
                value: row[j],
                normalized: row[j] / t.powf(d - 1.0),
            });
            v_sup[j] = v_sup[j].max(row[j]);
        }
    }
    let upper = t_grid.len() / 2;
    let x: Vec<f64> = t_grid[upper..].iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = v_sup[upper..].iter().map(|&v| clamped_ln(v, 1.0)).collect();
    let fit_points = t_grid
        .iter()
        .zip(&v_sup)
        .map(|(&t, &v)| FitPoint {
            param: None,
            x: t.ln(),
            y: clamped_ln(v, 1.0),
        })
        .collect();
    let exponent = Exponent::from_fit(None, fit_line(&x, &y), x.len());
    let verdict = if sizes.len() < MIN_SETS || x.len() < 3 {
        Verdict::Inconclusive
    } else {
        match exponent.upper(rules.se_multiplier) {
            None => Verdict::Inconclusive,
            Some(_) => {
                let se = exponent.stderr.expect("checked by upper");
                if exponent.slope <= (d - 1.0) + rules.threshold_slack + rules.se_multiplier * se {
                    Verdict::Consistent
                } else {
                    Verdict::Inconsistent
                }
            }
        }
    };
    Ok(RegimeReport {
        regime: Regime::Threshold,
        verdict,
        family: src.family().to_string(),
        dim: dim.get(),
        sizes,
        exponents: vec![exponent],
        table,
        fit_points,
        config: json!({
            "t_grid": t_grid,
            "first_member": first,
            "rules": rules,
            "source": src.describe(),
        }),
    })
}

fn require_sets(sizes: &[usize]) -> Result<()> {
    if sizes.len() < MIN_SETS {
        return Err(Error::Sequence(format!(
            "needs at least {MIN_SETS} sets, got {}",
            sizes.len()
        )));
    }
    Ok(())
}

/// Decay of a fixed-degree Weyl sum along the sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylDecay {
    pub n: usize,
    pub sizes: Vec<usize>,
    pub values: Vec<f64>,
    /// Slope of log W_n against log N.
    pub beta: f64,
    pub stderr: Option<f64>,
    /// d(1 − β)/2 + d/2.
    pub s_implied: f64,
    pub s_implied_stderr: Option<f64>,
    /// Members whose Weyl sum fell below the floor 1e-12 N².
    pub clamped: usize,
}

impl WeylDecay {
    /// True when clamped values dominate the fit, so the slope says more
    /// about the floor than about the point sets.
    pub fn floor_dominated(&self) -> bool {
        2 * self.clamped >= self.sizes.len()
    }
}

pub fn weyl_decay_exponent(src: &dyn SequenceSource, n: usize) -> Result<WeylDecay> {
    if n == 0 {
        return Err(Error::InvalidParameter("Weyl sums start at degree 1".into()));
    }
    let sizes = src.sizes();
    require_sets(&sizes)?;
    let d = src.dim().get() as f64;
    let values: Vec<f64> = per_member(0..sizes.len(), |k| Ok(src.weyl_sums(k, n)?[n]))?;
    let mut clamped = 0;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (&s, &w) in sizes.iter().zip(&values) {
        let n2 = (s as f64).powi(2);
        if w < CLAMP * n2 {
            clamped += 1;
        }
        x.push((s as f64).ln());
        y.push(clamped_ln(w, n2));
    }
    let fit = fit_line(&x, &y).expect("distinct sizes");
    Ok(WeylDecay {
        n,
        sizes,
        values,
        beta: fit.slope,
        stderr: fit.stderr,
        s_implied: 0.5 * d * (1.0 - fit.slope) + 0.5 * d,
        s_implied_stderr: fit.stderr.map(|se| 0.5 * d * se),
        clamped,
    })
}

/// Fit of log wce(X_N; s) against log N at one smoothness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrengthRow {
    pub s: f64,
    pub spec: SobolevSpec,
    pub wce_squared: Vec<f64>,
    pub slope: f64,
    pub stderr: Option<f64>,
    /// −s/d, the slope of a QMC design sequence of strength above s.
    pub predicted: f64,
    /// slope ≤ −s/d + z·SE.
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrengthTable {
    pub family: String,
    pub dim: u32,
    pub sizes: Vec<usize>,
    pub rows: Vec<StrengthRow>,
    /// Largest grid s whose fit passes; `None` if none does.
    pub s_star_hat: Option<f64>,
    pub config: Value,
}

pub fn estimate_strength(
    src: &dyn SequenceSource,
    s_grid: &[f64],
    rules: &VerdictRules,
) -> Result<StrengthTable> {
    let dim = src.dim();
    let d = dim.get() as f64;
    check_increasing("s", s_grid)?;
    for &s in s_grid {
        if !(s > 0.5 * d && s <= 0.5 * d + 3.0) {
            return Err(domain("s", s, "(d/2, d/2 + 3]"));
        }
    }
    let sizes = src.sizes();
    require_sets(&sizes)?;
    let x: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let mut rows = Vec::new();
    for &s in s_grid {
        let spec = strength_spec(dim, s)?;
        let wce_squared = per_member(0..sizes.len(), |k| src.wce_squared(k, &spec))?;
        let y: Vec<f64> = wce_squared
            .iter()
            .map(|&w| 0.5 * clamped_ln(w, CLAMP))
            .collect();
        let fit = fit_line(&x, &y).expect("distinct sizes");
        let predicted = -s / d;
        let passes = fit
            .stderr
            .is_some_and(|se| fit.slope <= predicted + rules.se_multiplier * se);
        rows.push(StrengthRow {
            s,
            spec,
            wce_squared,
            slope: fit.slope,
            stderr: fit.stderr,
            predicted,
            passes,
        });
    }
    let s_star_hat = rows.iter().filter(|r| r.passes).map(|r| r.s).reduce(f64::max);
    Ok(StrengthTable {
        family: src.family().to_string(),
        dim: dim.get(),
        sizes,
        rows,
        s_star_hat,
        config: json!({
            "s_grid": s_grid,
            "rules": rules,
            "source": src.describe(),
        }),
    })
}

/// Largest normalized Weyl sum over the degrees 1 ≤ n ≤ L(N) with
/// L(N) = max(1, ⌊c N^(α/d) / ln N⌋).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub n_points: usize,
    pub max_degree: usize,
    pub argmax: usize,
    pub max_weyl: f64,
    /// max_weyl / N².
    pub max_normalized: f64,
}

pub fn weyl_sweep(src: &dyn SequenceSource, alphas: &[f64], c: f64) -> Result<Vec<SweepRow>> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(domain("c", c, "(0, inf)"));
    }
    if let Some(&a) = alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(domain("alpha", a, "(0, inf)"));
    }
    let d = src.dim().get() as f64;
    let sizes = src.sizes();
    let degree = |n: usize, alpha: f64| -> usize {
        let nf = n as f64;
        let l = c * nf.powf(alpha / d) / nf.ln().max(1.0);
        (l.floor() as usize).max(1)
    };
    let per: Vec<Vec<SweepRow>> = per_member(0..sizes.len(), |k| {
        let n = sizes[k];
        let top = alphas.iter().map(|&a| degree(n, a)).max().unwrap_or(1);
        let w = src.weyl_sums(k, top)?;
        Ok(alphas
            .iter()
            .map(|&alpha| {
                let l = degree(n, alpha);
                let (argmax, max_weyl) = (1..=l)
                    .map(|m| (m, w[m]))
                    .fold((1, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
                SweepRow {
                    alpha,
                    n_points: n,
                    max_degree: l,
                    argmax,
                    max_weyl,
                    max_normalized: max_weyl / (n as f64).powi(2),
                }
            })
            .collect())
    })?;
    Ok(per.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointset::fibonacci_sphere;

    fn d(k: u32) -> SphereDim {
        SphereDim::new(k).unwrap()
    }

    #[test]
    fn sequence_guards() {
        let a = fibonacci_sphere(10).unwrap();
        let b = fibonacci_sphere(20).unwrap();
        assert!(PointSetSequence::new("f", vec![b.clone(), a.clone()]).is_err());
        assert!(PointSetSequence::new("f", vec![a.clone(), a.clone()]).is_err());
        assert!(PointSetSequence::new("f", vec![]).is_err());
        let c = random_uniform(d(3), 30, 1).unwrap();
        assert!(PointSetSequence::new("f", vec![a.clone(), b.clone(), c]).is_err());
        assert_eq!(PointSetSequence::new("f", vec![a, b]).unwrap().len(), 2);
    }

    #[test]
    fn ensemble_needs_enough_replicas() {
        assert!(IidEnsemble::new(d(2), vec![10, 20], 99, 0).is_err());
        let e = IidEnsemble::new(d(2), vec![10, 20], 100, 5).unwrap();
        assert_ne!(e.replica_seed(0, 1), e.replica_seed(1, 0));
        assert_eq!(e.replica(1, 3).unwrap(), e.replica(1, 3).unwrap());
    }

    #[test]
    fn window_rule_checks() {
        let sizes = [250, 500, 1000, 2000, 4000];
        assert!(WindowRule::default().angles(d(2), &sizes).is_ok());
        let linear = WindowRule::Power {
            scale: 1.0,
            exponent: 1.0,
        };
        assert!(linear.angles(d(2), &sizes).is_err());
        let flat = WindowRule::Power {
            scale: 1.0,
            exponent: 0.0,
        };
        assert!(flat.angles(d(2), &sizes).is_err());
    }

    #[test]
    fn default_grids() {
        let t = default_t_grid();
        assert!((t[0] - 0.5).abs() < 1e-15 && (t[11] - 16.0).abs() < 1e-12);
        assert!(default_phi_grid().iter().all(|&p| p > 0.0 && p < 0.5 * PI));
    }
}
