//! Number variance of cap counts: spectral series, exact pair kernel and a
//! Monte Carlo estimator, plus Weyl sums.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::overlap::{angle_between, CapOverlap};
use crate::pointset::{dot, fibonacci_sphere, random_rotation, PointSet, Provenance};
use crate::specfun::{
    cap_measure, cap_measure_unchecked, laplace_coeffs, laplace_tail_bounds,
    LegendreRecurrence, SeriesTruncation, SphereDim, TruncationConfig,
};
use crate::sum::{compensated_sum, FixedPointSum, NeumaierSum};
use crate::tail::{PairSeries, PairTail};

const ROW_BLOCK: usize = 16;
const LANES: usize = 8;

/// Σ_{i,j} P_n^(d)(⟨x_i, x_j⟩) for a single degree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylSum {
    pub n: usize,
    pub value: f64,
    pub n_points: usize,
}

/// Weyl sums for every degree 0..=max_degree (index 0 holds N²).
///
/// Rows are processed in fixed blocks whose partial results are combined in
/// block order, so the output does not depend on the thread count.
pub fn weyl_sums(x: &PointSet, max_degree: usize) -> Vec<f64> {
    let n = x.len();
    let m = x.dim().ambient();
    let rec = LegendreRecurrence::new(x.dim(), max_degree.max(1));
    let coords = x.coords();
    let blocks: Vec<Vec<f64>> = (0..n.div_ceil(ROW_BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![0.0; max_degree + 1];
            let mut lanes = [0.0; LANES];
            let mut filled = 0;
            for i in b * ROW_BLOCK..((b + 1) * ROW_BLOCK).min(n) {
                let p = &coords[i * m..(i + 1) * m];
                for j in i + 1..n {
                    lanes[filled] = dot(p, &coords[j * m..(j + 1) * m]).clamp(-1.0, 1.0);
                    filled += 1;
                    if filled == LANES {
                        accumulate_lanes(&rec, &lanes, LANES, &mut acc);
                        filled = 0;
                    }
                }
            }
            if filled > 0 {
                accumulate_lanes(&rec, &lanes, filled, &mut acc);
            }
            acc
        })
        .collect();
    let mut out = vec![0.0; max_degree + 1];
    for (deg, slot) in out.iter_mut().enumerate() {
        let off = compensated_sum(blocks.iter().map(|b| b[deg]));
        *slot = n as f64 + 2.0 * off;
    }
    out
}

/// Adds Σ_lanes P_deg(t_lane) into acc[deg] for all degrees.
#[inline]
fn accumulate_lanes(rec: &LegendreRecurrence, t: &[f64; LANES], used: usize, acc: &mut [f64]) {
    let max_degree = acc.len() - 1;
    let mut prev = [1.0; LANES];
    let mut cur = *t;
    for l in used..LANES {
        prev[l] = 0.0;
        cur[l] = 0.0;
    }
    acc[0] += used as f64;
    if max_degree == 0 {
        return;
    }
    acc[1] += cur.iter().sum::<f64>();
    let (alpha, beta) = rec.coefficients();
    for deg in 1..max_degree {
        let (a, b) = (alpha[deg], beta[deg]);
        let mut next = [0.0; LANES];
        for l in 0..LANES {
            next[l] = a * t[l] * cur[l] - b * prev[l];
        }
        prev = cur;
        cur = next;
        acc[deg + 1] += cur.iter().sum::<f64>();
    }
}

pub fn weyl_sum(x: &PointSet, n: usize) -> Result<WeylSum> {
    if n == 0 {
        return Err(Error::InvalidParameter("Weyl sums start at degree 1".into()));
    }
    Ok(WeylSum {
        n,
        value: weyl_sums(x, n)[n],
        n_points: x.len(),
    })
}

/// Number variance of i.i.d. uniform points: N σ (1 − σ).
pub fn iid_variance(dim: SphereDim, n: usize, phi: f64) -> Result<f64> {
    let s = cap_measure(dim, phi)?;
    Ok(n as f64 * s * (1.0 - s))
}

fn check_open_angle(phi: f64) -> Result<()> {
    if phi > 0.0 && phi < PI {
        Ok(())
    } else {
        Err(domain("phi", phi, "(0, pi)"))
    }
}

/// Default spectral tolerance: 1e-2 · max(1, N σ (1 − σ)).
pub fn default_spectral_tol(dim: SphereDim, n: usize, phi: f64) -> f64 {
    let s = cap_measure_unchecked(dim, phi);
    1e-2 * (n as f64 * s * (1.0 - s)).max(1.0)
}

/// Truncated spectral number variance with its certified tail bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralVariance {
    pub value: f64,
    pub tail_bound: f64,
    pub max_degree: usize,
}

/// Evaluates Σ_n a_n(φ)² Z(d,n) W_n for one point set, reusing the Weyl sums
/// and pair geometry across angles.
pub struct SpectralEvaluator<'a> {
    x: &'a PointSet,
    cfg: TruncationConfig,
    tail: PairTail,
    weyl: Vec<f64>,
}

/// a_n(φ)² Z(d,n) for n = 0..=max_degree, with index 0 set to zero.
pub(crate) fn variance_weights(dim: SphereDim, phi: f64, max_degree: usize) -> Vec<f64> {
    let mut w = laplace_coeffs(dim, phi, max_degree).expect("angle already validated");
    w[0] = 0.0;
    let z = ZdimTable::new(dim);
    for (n, a) in w.iter_mut().enumerate().skip(1) {
        *a = *a * *a * z.get(n);
    }
    w
}

/// Z(d,n) as an unrounded float, for weights at large degree.
pub(crate) struct ZdimTable {
    d: f64,
}

impl ZdimTable {
    pub(crate) fn new(dim: SphereDim) -> Self {
        Self { d: dim.get() as f64 }
    }

    #[inline]
    pub(crate) fn get(&self, n: usize) -> f64 {
        let d = self.d;
        let n = n as f64;
        if n == 0.0 {
            return 1.0;
        }
        if d == 1.0 {
            return 2.0;
        }
        // (2n+d−1)/(d−1) · C(n+d−2, d−2) = (2n+d−1) Γ(n+d−1) / (Γ(d) Γ(n+1))
        let mut c = (2.0 * n + d - 1.0) / (d - 1.0);
        let k = d as usize - 2;
        for i in 1..=k {
            c *= (n + i as f64) / i as f64;
        }
        c
    }
}

impl<'a> SpectralEvaluator<'a> {
    pub fn new(x: &'a PointSet, cfg: &TruncationConfig) -> Self {
        Self {
            x,
            cfg: cfg.clone(),
            tail: PairTail::new(x),
            weyl: Vec::new(),
        }
    }

    pub fn point_set(&self) -> &PointSet {
        self.x
    }

    /// Smallest degree whose certified tail is ≤ tol.
    ///
    /// The diagonal part of the tail is N (σ(1−σ) − Σ_{n≤M} a_n² Z), which is
    /// exact by Parseval; the off-diagonal part uses the pairwise Gegenbauer
    /// bound.
    pub fn truncation(&self, phi: f64, tol: f64) -> Result<SeriesTruncation> {
        check_open_angle(phi)?;
        if !(tol > 0.0) {
            return Err(domain("tol", tol, "(0, inf]"));
        }
        let dim = self.x.dim();
        let sigma = cap_measure_unchecked(dim, phi);
        PairSeries {
            tail: &self.tail,
            weights: |m| variance_weights(dim, phi, m),
            tail_sums: |m| laplace_tail_bounds(dim, phi, m, &self.cfg),
            total: Some(sigma * (1.0 - sigma)),
            gegenbauer: self.cfg.gegenbauer_constant(dim),
            hard_cap: self.cfg.hard_cap,
        }
        .truncation(tol)
    }

    /// Makes Weyl sums available up to `max_degree`.
    pub fn prepare(&mut self, max_degree: usize) {
        if self.weyl.len() <= max_degree {
            self.weyl = weyl_sums(self.x, max_degree);
        }
    }

    pub fn weyl(&self) -> &[f64] {
        &self.weyl
    }

    /// Sum of the first M terms, given a truncation.
    pub fn evaluate(&mut self, phi: f64, truncation: SeriesTruncation) -> Result<SpectralVariance> {
        check_open_angle(phi)?;
        let m = truncation.max_degree;
        self.prepare(m);
        let w = variance_weights(self.x.dim(), phi, m);
        let mut acc = NeumaierSum::new();
        for n in 1..=m {
            acc.add(w[n] * self.weyl[n]);
        }
        Ok(SpectralVariance {
            value: acc.value(),
            tail_bound: truncation.tail_bound,
            max_degree: m,
        })
    }

    pub fn variance(&mut self, phi: f64, tol: f64) -> Result<SpectralVariance> {
        let t = self.truncation(phi, tol)?;
        self.evaluate(phi, t)
    }
}

/// V(X, φ) from the spectral expansion, truncated where the certified tail
/// drops below `tol`.
pub fn number_variance_spectral(
    x: &PointSet,
    phi: f64,
    tol: f64,
    cfg: &TruncationConfig,
) -> Result<SpectralVariance> {
    SpectralEvaluator::new(x, cfg).variance(phi, tol)
}

/// How Monte Carlo cap centers are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CenterSampling {
    /// i.i.d. uniform centers; the standard error is meaningful.
    #[default]
    Uniform,
    /// A randomly rotated Fibonacci lattice (S² only). The reported standard
    /// error treats the centers as independent and is therefore conservative.
    Fibonacci,
}

/// Monte Carlo estimate of the number variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectVariance {
    pub estimate: f64,
    pub standard_error: f64,
}

pub fn number_variance_direct(
    x: &PointSet,
    phi: f64,
    num_centers: usize,
    seed: u64,
) -> Result<DirectVariance> {
    Ok(number_variance_direct_many(x, &[phi], num_centers, seed, CenterSampling::Uniform)?[0])
}

fn centers(dim: SphereDim, k: usize, seed: u64, sampling: CenterSampling) -> Result<Vec<f64>> {
    let m = dim.ambient();
    match sampling {
        CenterSampling::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::with_capacity(k * m);
            for _ in 0..k {
                loop {
                    let v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
                    let r = dot(&v, &v).sqrt();
                    if r > 1e-150 {
                        out.extend(v.iter().map(|a| a / r));
                        break;
                    }
                }
            }
            Ok(out)
        }
        CenterSampling::Fibonacci => {
            if dim.get() != 2 {
                return Err(Error::InvalidParameter(
                    "Fibonacci centers exist only on the 2-sphere".into(),
                ));
            }
            let lattice = fibonacci_sphere(k)?.rotated(&random_rotation(dim, seed))?;
            Ok(lattice.coords().to_vec())
        }
    }
}

/// Monte Carlo estimates at several angles from one set of centers. Counting
/// uses the strict test ⟨c, x_i⟩ > cos φ.
pub fn number_variance_direct_many(
    x: &PointSet,
    phis: &[f64],
    num_centers: usize,
    seed: u64,
    sampling: CenterSampling,
) -> Result<Vec<DirectVariance>> {
    if num_centers < 2 {
        return Err(Error::InvalidParameter("need at least two centers".into()));
    }
    for &phi in phis {
        if !(0.0..=PI).contains(&phi) {
            return Err(domain("phi", phi, "[0, pi]"));
        }
    }
    let dim = x.dim();
    let m = dim.ambient();
    let centers = centers(dim, num_centers, seed, sampling)?;
    let np = x.len() as f64;
    let expected: Vec<f64> = phis.iter().map(|&p| np * cap_measure_unchecked(dim, p)).collect();
    let cosines: Vec<f64> = phis.iter().map(|p| p.cos()).collect();
    let mut order: Vec<usize> = (0..phis.len()).collect();
    order.sort_by(|&a, &b| cosines[b].total_cmp(&cosines[a]));
    let sorted: Vec<f64> = order.iter().map(|&i| cosines[i]).collect();
    const CHUNK: usize = 256;
    let partials: Vec<(Vec<NeumaierSum>, Vec<NeumaierSum>)> = centers
        .par_chunks(CHUNK * m)
        .map(|chunk| {
            let mut first = vec![NeumaierSum::new(); phis.len()];
            let mut second = vec![NeumaierSum::new(); phis.len()];
            let mut hist = vec![0u64; sorted.len() + 1];
            for c in chunk.chunks_exact(m) {
                hist.iter_mut().for_each(|h| *h = 0);
                for p in x.points() {
                    let t = dot(c, p);
                    // number of thresholds strictly below t; sorted descending
                    let below = sorted.partition_point(|&s| s >= t);
                    hist[below] += 1;
                }
                let mut count = 0u64;
                for (rank, &idx) in order.iter().enumerate() {
                    count += hist[rank];
                    let y = (count as f64 - expected[idx]).powi(2);
                    first[idx].add(y);
                    second[idx].add(y * y);
                }
            }
            (first, second)
        })
        .collect();
    let k = num_centers as f64;
    let mut out = Vec::with_capacity(phis.len());
    for a in 0..phis.len() {
        let s1 = compensated_sum(partials.iter().map(|p| p.0[a].value()));
        let s2 = compensated_sum(partials.iter().map(|p| p.1[a].value()));
        let mean = s1 / k;
        let var = ((s2 - k * mean * mean) / (k - 1.0)).max(0.0);
        out.push(DirectVariance {
            estimate: mean,
            standard_error: (var / k).sqrt(),
        });
    }
    Ok(out)
}

/// Exact number variance at several angles through the cap-overlap kernel:
/// V = N σ(1−σ) + Σ_{i≠j} (O(θ_ij) − σ²).
pub fn number_variance_pair_kernel(x: &PointSet, phis: &[f64]) -> Result<Vec<f64>> {
    let kernels: Vec<CapOverlap> = phis
        .iter()
        .map(|&p| CapOverlap::new(x.dim(), p))
        .collect::<Result<_>>()?;
    Ok(pair_kernel_sums(x, &kernels))
}

pub(crate) fn pair_kernel_sums(x: &PointSet, kernels: &[CapOverlap]) -> Vec<f64> {
    let n = x.len();
    let m = x.dim().ambient();
    let coords = x.coords();
    let reach = kernels.iter().map(|k| k.support()).fold(0.0, f64::max);
    // pairs farther apart than every support only contribute end values
    let cos_reach = reach.cos();
    let partials: Vec<(Vec<FixedPointSum>, u64)> = (0..n.div_ceil(ROW_BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![FixedPointSum::new(); kernels.len()];
            let mut far = 0u64;
            for i in b * ROW_BLOCK..((b + 1) * ROW_BLOCK).min(n) {
                let p = &coords[i * m..(i + 1) * m];
                for j in i + 1..n {
                    let q = &coords[j * m..(j + 1) * m];
                    if reach < PI && dot(p, q) < cos_reach - 1e-12 {
                        far += 1;
                        continue;
                    }
                    let theta = angle_between(p, q);
                    for (a, k) in acc.iter_mut().zip(kernels) {
                        a.add(k.overlap(theta));
                    }
                }
            }
            (acc, far)
        })
        .collect();
    let np = n as f64;
    let pairs = np * (np - 1.0) / 2.0;
    kernels
        .iter()
        .enumerate()
        .map(|(a, k)| {
            let mut total = FixedPointSum::new();
            let mut far = 0u64;
            for (acc, f) in &partials {
                total.merge(&acc[a]);
                far += f;
            }
            let s = k.sigma();
            let near = total.value() + far as f64 * k.overlap(PI);
            let v = np * s * (1.0 - s) + 2.0 * (near - pairs * s * s);
            v.max(0.0)
        })
        .collect()
}

/// g_φ(t) = Σ_{n=1}^{M} a_n(φ)² Z(d,n) P_n^(d)(t), the truncated covariance
/// kernel of the cap counts.
pub fn g_phi_series(dim: SphereDim, phi: f64, t: f64, max_degree: usize) -> Result<f64> {
    if !(0.0..=PI).contains(&phi) {
        return Err(domain("phi", phi, "[0, pi]"));
    }
    if !(t.abs() <= 1.0 + 1e-12) {
        return Err(domain("t", t, "[-1, 1]"));
    }
    let w = variance_weights(dim, phi, max_degree);
    let rec = LegendreRecurrence::new(dim, max_degree.max(1));
    let mut acc = NeumaierSum::new();
    rec.for_each(t.clamp(-1.0, 1.0), |n, p| {
        if n >= 1 && n <= max_degree {
            acc.add(w[n] * p);
        }
    });
    Ok(acc.value())
}

/// Evaluation route behind a variance profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceMethod {
    Spectral,
    MonteCarlo,
    PairKernel,
}

impl VarianceMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Spectral => "spectral",
            Self::MonteCarlo => "monte-carlo",
            Self::PairKernel => "pair-kernel",
        }
    }
}

/// Settings for [`variance_profile`].
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileMethod {
    /// `tol = None` uses [`default_spectral_tol`] at each angle.
    Spectral {
        tol: Option<f64>,
        cfg: TruncationConfig,
    },
    MonteCarlo {
        centers: usize,
        seed: u64,
        sampling: CenterSampling,
    },
    PairKernel,
}

/// Number variance over a grid of angles. `errors` holds the spectral tail
/// bound, the Monte Carlo standard error, or zero for the pair kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceProfile {
    pub dim: SphereDim,
    pub n_points: usize,
    pub method: VarianceMethod,
    pub angles: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub max_degrees: Vec<usize>,
    pub provenance: Provenance,
}

impl VarianceProfile {
    /// CSV with columns phi, value, error, method and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phi,value,error,method\n");
        for ((a, v), e) in self.angles.iter().zip(&self.values).zip(&self.errors) {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt17(*a),
                fmt17(*v),
                fmt17(*e),
                self.method.as_str()
            ));
        }
        out
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn check_angle_grid(angles: &[f64]) -> Result<()> {
    if angles.is_empty() {
        return Err(Error::InvalidParameter("angle grid is empty".into()));
    }
    for &a in angles {
        check_open_angle(a)?;
    }
    if angles.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter("angles must be strictly increasing".into()));
    }
    Ok(())
}

pub fn variance_profile(x: &PointSet, angles: &[f64], method: &ProfileMethod) -> Result<VarianceProfile> {
    check_angle_grid(angles)?;
    let (kind, values, errors, max_degrees) = match method {
        ProfileMethod::Spectral { tol, cfg } => {
            let mut eval = SpectralEvaluator::new(x, cfg);
            let truncations: Vec<SeriesTruncation> = angles
                .iter()
                .map(|&phi| {
                    let tol = tol.unwrap_or_else(|| default_spectral_tol(x.dim(), x.len(), phi));
                    eval.truncation(phi, tol)
                })
                .collect::<Result<_>>()?;
            let top = truncations.iter().map(|t| t.max_degree).max().unwrap_or(1);
            eval.prepare(top);
            let mut values = Vec::new();
            let mut errors = Vec::new();
            let mut degrees = Vec::new();
            for (&phi, t) in angles.iter().zip(truncations) {
                let r = eval.evaluate(phi, t)?;
                values.push(r.value);
                errors.push(r.tail_bound);
                degrees.push(r.max_degree);
            }
            (VarianceMethod::Spectral, values, errors, degrees)
        }
        ProfileMethod::MonteCarlo {
            centers,
            seed,
            sampling,
        } => {
            let r = number_variance_direct_many(x, angles, *centers, *seed, *sampling)?;
            (
                VarianceMethod::MonteCarlo,
                r.iter().map(|v| v.estimate).collect(),
                r.iter().map(|v| v.standard_error).collect(),
                Vec::new(),
            )
        }
        ProfileMethod::PairKernel => {
            let values = number_variance_pair_kernel(x, angles)?;
            let errors = vec![0.0; values.len()];
            (VarianceMethod::PairKernel, values, errors, Vec::new())
        }
    };
    Ok(VarianceProfile {
        dim: x.dim(),
        n_points: x.len(),
        method: kind,
        angles: angles.to_vec(),
        values,
        errors,
        max_degrees,
        provenance: x.provenance().clone(),
    })
}
