//! Ordinary least squares for the log-log trend fits.

use serde::{Deserialize, Serialize};

/// Fitted line y = intercept + slope · x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope, sqrt(SSR / (n − 2) / Sxx); `None` with
    /// fewer than three points.
    pub stderr: Option<f64>,
    pub points: usize,
}

/// Least-squares line through (x_i, y_i). `None` when fewer than two points
/// are given or all x coincide.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    assert_eq!(x.len(), y.len(), "fit_line: length mismatch");
    let n = x.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = (n > 2).then(|| {
        let ssr: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (ssr / (nf - 2.0) / sxx).sqrt()
    });
    Some(LinearFit {
        slope,
        intercept,
        stderr,
        points: n,
    })
}
