//! Closed-form predictors for the non-convergence construction and power-law
//! fitting for rate and regret curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// GDA on the quadratic family: `∇_x f(x_T, y_T) = grad0 · (1 + η^x (L² − r))^T`.
pub fn lemma1_gda_predict(l: f64, r: f64, eta_x: f64, grad0: f64, steps: u64) -> f64 {
    let factor = 1.0 + eta_x * (l * l - r);
    (0..steps).fold(grad0, |acc, _| acc * factor)
}

/// Product lower bound for ψ-adaptive non-nested runs on the quadratic family:
/// `grad0 · Π_t [1 + (L η^x / √v_t)(1 − β)(L − r)]`, where `v_trace[t]` is the
/// x second moment used by the step that moves `x_t` (i.e. after that step's
/// update). Equality holds when `β = 0`.
pub fn lemma1_adaptive_bound(l: f64, r: f64, eta_x: f64, beta: f64, v_trace: &[f64], grad0: f64) -> f64 {
    v_trace
        .iter()
        .fold(grad0, |acc, v| acc * (1.0 + l * eta_x / v.sqrt() * (1.0 - beta) * (l - r)))
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    pub points: usize,
    /// Index of the first point used (after burn-in).
    pub window_start: usize,
}

pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    fit_window(xs, ys, 0)
}

/// As [`fit_loglog_slope`], dropping the first `burn_in` fraction of points.
pub fn fit_loglog_slope_after_burn_in(xs: &[f64], ys: &[f64], burn_in: f64) -> Result<SlopeFit> {
    let skip = (xs.len() as f64 * burn_in).floor() as usize;
    fit_window(xs, ys, skip)
}

fn fit_window(xs: &[f64], ys: &[f64], skip: usize) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::Shape { expected: xs.len(), got: ys.len() });
    }
    if let Some((a, b)) = xs.iter().zip(ys).find(|(a, b)| !(**a > 0.0 && **b > 0.0)) {
        return Err(Error::LogDomain(format!("nonpositive point ({a}, {b})")));
    }
    let lx: Vec<f64> = xs[skip.min(xs.len())..].iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys[skip.min(ys.len())..].iter().map(|v| v.ln()).collect();
    let n = lx.len();
    if n < 3 {
        return Err(Error::LogDomain(format!("need at least 3 points, have {n}")));
    }
    let nf = n as f64;
    let mx = lx.iter().sum::<f64>() / nf;
    let my = ly.iter().sum::<f64>() / nf;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::LogDomain("all abscissae are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual =
        (lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum::<f64>() / nf).sqrt();
    Ok(SlopeFit { slope, intercept, residual, points: n, window_start: skip })
}

/// Geometrically spaced integer sample positions in `[1, n]`, deduplicated.
pub fn log_spaced_indices(n: usize, count: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..count)
        .map(|k| {
            let f = k as f64 / (count.max(2) - 1) as f64;
            ((n as f64).powf(f)).round().clamp(1.0, n as f64) as usize
        })
        .collect();
    out.dedup();
    out
}
