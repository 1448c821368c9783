//! Tail bounds for zonal series summed over all pairs of a point set.
//!
//! For a series Σ_n c_n P_n^(d)(t) with c_n ≥ 0, the part beyond degree M
//! evaluated at a pair with angle θ is at most
//! min(T_0, c_d (sin θ)^(−k) T_k), where T_0 ≥ Σ_{n>M} c_n,
//! T_k ≥ Σ_{n>M} c_n n^(−k), k = (d−1)/2 and c_d is the Gegenbauer constant.
//! Summing that pair by pair is much sharper than the worst case N² T_0
//! because only near-coincident and near-antipodal pairs see the full T_0.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::pointset::PointSet;
use crate::specfun::SeriesTruncation;
use crate::sum::NeumaierSum;

const RATIO_LN: f64 = 0.01;
const BUCKETS: usize = 4096;

/// Histogram of (sin θ_ij)^(−k) over unordered pairs i < j.
#[derive(Debug, Clone)]
pub struct PairTail {
    n_points: usize,
    counts: Vec<u64>,
    sums: Vec<f64>,
    // pairs whose weight overflows the histogram, including sin θ = 0
    saturated: u64,
}

#[derive(Clone)]
struct Partial {
    counts: Vec<u64>,
    sums: Vec<f64>,
    saturated: u64,
}

impl Partial {
    fn new() -> Self {
        Self {
            counts: vec![0; BUCKETS],
            sums: vec![0.0; BUCKETS],
            saturated: 0,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for b in 0..BUCKETS {
            self.counts[b] += other.counts[b];
            self.sums[b] += other.sums[b];
        }
        self.saturated += other.saturated;
        self
    }
}

impl PairTail {
    pub fn new(x: &PointSet) -> Self {
        let m = x.dim().ambient();
        let k = 0.5 * (x.dim().get() as f64 - 1.0);
        let n = x.len();
        let coords = x.coords();
        const ROWS: usize = 32;
        let partials: Vec<Partial> = (0..n.div_ceil(ROWS))
            .into_par_iter()
            .map(|b| {
                let mut acc = Partial::new();
                for i in b * ROWS..((b + 1) * ROWS).min(n) {
                    let p = &coords[i * m..(i + 1) * m];
                    for j in i + 1..n {
                        let q = &coords[j * m..(j + 1) * m];
                        let (mut minus, mut plus) = (0.0, 0.0);
                        for t in 0..m {
                            minus += (p[t] - q[t]) * (p[t] - q[t]);
                            plus += (p[t] + q[t]) * (p[t] + q[t]);
                        }
                        let sine = 0.5 * (minus * plus).sqrt();
                        let ln_w = -k * sine.ln();
                        let b = (ln_w / RATIO_LN).max(0.0);
                        if sine > 0.0 && b < BUCKETS as f64 {
                            let b = b as usize;
                            acc.counts[b] += 1;
                            acc.sums[b] += ln_w.exp();
                        } else {
                            acc.saturated += 1;
                        }
                    }
                }
                acc
            })
            .collect();
        let total = partials.into_iter().fold(Partial::new(), Partial::merge);
        Self {
            n_points: n,
            counts: total.counts,
            sums: total.sums,
            saturated: total.saturated,
        }
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Upper bound on Σ_{i≠j} min(t0, scaled_tk · (sin θ_ij)^(−k)) over
    /// ordered pairs.
    pub fn off_diagonal(&self, t0: f64, scaled_tk: f64) -> f64 {
        let mut acc = self.saturated as f64 * t0;
        for b in 0..BUCKETS {
            let c = self.counts[b];
            if c == 0 {
                continue;
            }
            let hi = ((b + 1) as f64 * RATIO_LN).exp();
            let lo = (b as f64 * RATIO_LN).exp();
            acc += if scaled_tk * hi <= t0 {
                scaled_tk * self.sums[b]
            } else if scaled_tk * lo >= t0 {
                c as f64 * t0
            } else {
                (c as f64 * t0).min(scaled_tk * self.sums[b])
            };
        }
        2.0 * acc
    }
}

/// A zonal series Σ_{n≥1} w_n P_n^(d)(t) with w_n ≥ 0, summed over all
/// ordered pairs of a point set including the diagonal.
pub(crate) struct PairSeries<'a, W, B>
where
    W: Fn(usize) -> Vec<f64>,
    B: Fn(usize) -> (f64, f64),
{
    pub tail: &'a PairTail,
    /// w_0..=w_m (w_0 is ignored).
    pub weights: W,
    /// Bounds (T_0, T_k) on Σ_{n>m} w_n and Σ_{n>m} w_n n^(−k).
    pub tail_sums: B,
    /// Σ_{n≥1} w_n when known in closed form; the diagonal tail is then
    /// exact instead of bounded.
    pub total: Option<f64>,
    /// Gegenbauer constant c_d.
    pub gegenbauer: f64,
    pub hard_cap: usize,
}

impl<W, B> PairSeries<'_, W, B>
where
    W: Fn(usize) -> Vec<f64>,
    B: Fn(usize) -> (f64, f64),
{
    /// Smallest degree M whose bound on the dropped part of the pair sum is
    /// ≤ tol, with that bound.
    pub fn truncation(&self, tol: f64) -> Result<SeriesTruncation> {
        if !(tol > 0.0) {
            return Err(domain("tol", tol, "(0, inf]"));
        }
        let np = self.tail.n_points() as f64;
        let mut hi = 16usize;
        let mut below = 0usize;
        loop {
            let top = hi.min(self.hard_cap);
            let w = (self.weights)(top);
            let mut prefix = Vec::with_capacity(top + 1);
            let mut acc = NeumaierSum::new();
            prefix.push(0.0);
            for &v in &w[1..] {
                acc.add(v);
                prefix.push(acc.value());
            }
            let bound = |m: usize| -> f64 {
                let (t0, tk) = (self.tail_sums)(m);
                let diag = match self.total {
                    Some(total) => {
                        let margin = total * (1e-12 + 1e-16 * m as f64);
                        (total - prefix[m]).max(0.0) + margin
                    }
                    None => t0,
                };
                np * diag + self.tail.off_diagonal(t0, self.gegenbauer * tk)
            };
            if bound(top) <= tol {
                let (mut lo, mut up) = (below, top);
                while up - lo > 1 {
                    let mid = lo + (up - lo) / 2;
                    if bound(mid) <= tol {
                        up = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Ok(SeriesTruncation {
                    max_degree: up,
                    tail_bound: bound(up),
                });
            }
            if top >= self.hard_cap {
                return Err(Error::TruncationInfeasible {
                    required: (self.hard_cap as u64).saturating_mul(2),
                    cap: self.hard_cap,
                });
            }
            below = top;
            hi *= 4;
        }
    }
}
