//! Trace post-processing: log-log slope fits for regret-scaling checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares fit of `log y` against `log t` over a window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeFit {
    pub exponent: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    /// RMS residual in log space.
    pub residual: f64,
    pub points: usize,
}

/// Fit `log(value)` vs `log(t)` by least squares over `t` in
/// `[window.0, window.1]`. Every value inside the window must be positive.
pub fn fit_loglog_slope(ts: &[f64], values: &[f64], window: (f64, f64)) -> Result<SlopeFit> {
    if ts.len() != values.len() {
        return Err(Error::Dimension("t and value series lengths differ".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in ts.iter().zip(values) {
        if t < window.0 || t > window.1 {
            continue;
        }
        if !(v > 0.0) {
            return Err(Error::Invalid(format!("non-positive value {v} at t={t} in fit window")));
        }
        xs.push(t.ln());
        ys.push(v.ln());
    }
    if xs.len() < 2 {
        return Err(Error::Invalid("fewer than two points in fit window".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::Invalid("degenerate fit window (single t)".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut sse = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let e = y - (intercept + slope * x);
        sse += e * e;
    }
    Ok(SlopeFit {
        exponent: slope,
        intercept,
        window,
        residual: (sse / n).sqrt(),
        points: xs.len(),
    })
}

/// Geometric grid of `count` distinct integer checkpoints in `[lo, hi]`.
pub fn log_grid(lo: u64, hi: u64, count: usize) -> Vec<u64> {
    assert!(lo >= 1 && hi >= lo && count >= 2);
    let (flo, fhi) = (lo as f64, hi as f64);
    let mut out: Vec<u64> = (0..count)
        .map(|i| {
            let f = i as f64 / (count - 1) as f64;
            (flo * (fhi / flo).powf(f)).round() as u64
        })
        .collect();
    out.dedup();
    out
}
