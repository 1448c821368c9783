//! Measure of the intersection of two congruent caps as a function of the
//! angle between their centers.
//!
//! By Funk–Hecke, g_φ(cos θ) = Σ_{n≥1} a_n(φ)² Z(d,n) P_n^(d)(cos θ) equals
//! σ(C(a,φ) ∩ C(b,φ)) − σ(C(·,φ))² for centers a, b at angle θ, so summing
//! this closed form over all pairs gives the number variance with no
//! truncation error.
//!
//! The overlap O(θ) satisfies
//!
//! ```text
//! O'(θ) = −(γ_d γ_{d−1} / (d−1)) sin(φ)^(d−1) (1 − cot²φ tan²(θ/2))_+^((d−1)/2)
//! ```
//!
//! for d ≥ 2 (flux of the moving cap boundary through the fixed cap), with
//! O(0) = σ. It is tabulated once per angle on the variable
//! u = 1 − sqrt(1 − θ/θ*), which turns the algebraic endpoint behaviour at
//! θ* = 2 min(φ, π − φ) into a polynomial one, and then interpolated by cubic
//! Hermite segments using the exact derivative.

use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::quad::GaussLegendre;
use crate::specfun::{cap_measure_unchecked, gamma_d, SphereDim};

const CELLS: usize = 1024;
const CELL_NODES: usize = 10;

#[derive(Debug, Clone)]
pub struct CapOverlap {
    dim: SphereDim,
    phi: f64,
    sigma: f64,
    theta_star: f64,
    end_value: f64,
    table: Option<Table>,
}

#[derive(Debug, Clone)]
struct Table {
    values: Vec<f64>,
    // dO/du at the nodes
    slopes: Vec<f64>,
}

impl CapOverlap {
    pub fn new(dim: SphereDim, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&phi) {
            return Err(domain("phi", phi, "[0, pi]"));
        }
        let sigma = cap_measure_unchecked(dim, phi);
        let theta_star = 2.0 * phi.min(PI - phi);
        let mut kernel = Self {
            dim,
            phi,
            sigma,
            theta_star,
            end_value: (2.0 * sigma - 1.0).max(0.0),
            table: None,
        };
        if dim.get() >= 2 && theta_star > 0.0 {
            kernel.build_table();
        }
        Ok(kernel)
    }

    pub fn dim(&self) -> SphereDim {
        self.dim
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// σ(C(·, φ)).
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Separation beyond which the overlap stays constant.
    pub fn support(&self) -> f64 {
        self.theta_star
    }

    fn derivative_scale(&self) -> f64 {
        let d = self.dim.get();
        let lower = SphereDim::new(d - 1).expect("d >= 2");
        gamma_d(self.dim) * gamma_d(lower) / (d as f64 - 1.0) * self.phi.sin().powi(d as i32 - 1)
    }

    /// (1 − cot²φ tan²(s/2))_+^((d−1)/2)
    fn flux_profile(&self, s: f64) -> f64 {
        let num = self.phi.cos() * (0.5 * s).sin();
        let den = self.phi.sin() * (0.5 * s).cos();
        let base = 1.0 - (num * num) / (den * den);
        if base <= 0.0 {
            0.0
        } else {
            base.powf(0.5 * (self.dim.get() as f64 - 1.0))
        }
    }

    fn theta_of(&self, u: f64) -> f64 {
        let w = 1.0 - u;
        self.theta_star * (1.0 - w * w)
    }

    fn build_table(&mut self) {
        let scale = self.derivative_scale();
        let rule = GaussLegendre::new(CELL_NODES);
        // dO/du = −scale · profile(θ(u)) · θ'(u), θ'(u) = 2 θ* (1 − u)
        let rate = |u: f64| -> f64 {
            let theta = self.theta_of(u);
            -scale * self.flux_profile(theta) * 2.0 * self.theta_star * (1.0 - u)
        };
        let h = 1.0 / CELLS as f64;
        let mut values = Vec::with_capacity(CELLS + 1);
        let mut slopes = Vec::with_capacity(CELLS + 1);
        let mut acc = 0.0;
        values.push(self.sigma);
        slopes.push(rate(0.0));
        for k in 0..CELLS {
            let a = k as f64 * h;
            acc += rule.integrate(a, a + h, rate);
            values.push(self.sigma + acc);
            slopes.push(rate(a + h));
        }
        // the integral over the full support must land on max(0, 2σ − 1)
        self.end_value = *values.last().expect("nonempty");
        self.table = Some(Table { values, slopes });
    }

    /// σ(C(a, φ) ∩ C(b, φ)) for centers at angle `theta` ∈ [0, π].
    pub fn overlap(&self, theta: f64) -> f64 {
        if theta >= self.theta_star {
            return self.end_value;
        }
        match &self.table {
            None => self.overlap_circle(theta),
            Some(table) => {
                let u = 1.0 - (1.0 - theta / self.theta_star).max(0.0).sqrt();
                let x = u * CELLS as f64;
                let k = (x as usize).min(CELLS - 1);
                let t = x - k as f64;
                let h = 1.0 / CELLS as f64;
                let (y0, y1) = (table.values[k], table.values[k + 1]);
                let (m0, m1) = (table.slopes[k] * h, table.slopes[k + 1] * h);
                let t2 = t * t;
                let t3 = t2 * t;
                (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                    + (t3 - 2.0 * t2 + t) * m0
                    + (-2.0 * t3 + 3.0 * t2) * y1
                    + (t3 - t2) * m1
            }
        }
    }

    fn overlap_circle(&self, theta: f64) -> f64 {
        let direct = (2.0 * self.phi - theta).max(0.0);
        let wrapped = (2.0 * self.phi - (2.0 * PI - theta)).max(0.0);
        (direct + wrapped) / (2.0 * PI)
    }

    /// g_φ(cos θ) = overlap(θ) − σ².
    pub fn covariance(&self, theta: f64) -> f64 {
        self.overlap(theta) - self.sigma * self.sigma
    }
}

/// Angle between two unit vectors, accurate for nearly equal and nearly
/// antipodal pairs.
#[inline]
pub fn angle_between(x: &[f64], y: &[f64]) -> f64 {
    let mut diff = 0.0;
    let mut sum = 0.0;
    for (a, b) in x.iter().zip(y) {
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}
