//! Exponential decay-rate fits on `(s, value)` series.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Least-squares fit of `log(value) = c - rate·s` over a window.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DecayFit {
    /// Negated slope of the log-linear fit.
    pub rate: f64,
    /// Coefficient of determination of the fit.
    pub r_squared: f64,
    pub window: (f64, f64),
    pub points_used: usize,
}

/// Fit `value ≈ C e^{-rate·s}` on the points with `s ∈ [window.0, window.1]`.
///
/// Needs at least 5 strictly positive points inside the window.
pub fn decay_fit(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(s, _)| *s >= window.0 && *s <= window.1)
        .cloned()
        .collect();
    if pts.len() < 5 {
        return Err(Error::Diagnostic(format!(
            "decay fit needs ≥ 5 points in [{}, {}], got {}",
            window.0,
            window.1,
            pts.len()
        )));
    }
    if let Some((s, v)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::Diagnostic(format!(
            "decay fit needs positive values, got {v} at s = {s}"
        )));
    }
    let n = pts.len() as f64;
    let mean_s = pts.iter().map(|(s, _)| s).sum::<f64>() / n;
    let mean_l = pts.iter().map(|(_, v)| v.ln()).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (s, v) in &pts {
        let ds = s - mean_s;
        let dl = v.ln() - mean_l;
        sxx += ds * ds;
        sxy += ds * dl;
        syy += dl * dl;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(DecayFit {
        rate: -slope,
        r_squared,
        window,
        points_used: pts.len(),
    })
}
