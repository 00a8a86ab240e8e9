use super::TailEstimate;
use crate::error::{Error, Result};
use crate::stats::{linear_fit, LinearFit};
use serde::{Deserialize, Serialize};

/// How `log p` is regressed on `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Transform {
    /// `log(-log p)` on `log n`; the slope is `zeta`.
    LogLog,
    /// `log p` on `n^zeta` for a given `zeta`; the slope is `-c`.
    LogVsNZeta { zeta: f64 },
    /// `log p` on `sqrt(n)`; the slope is `-c`.
    LogVsSqrtN,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    /// Fitted exponent, for [`Transform::LogLog`].
    pub zeta_hat: Option<f64>,
    /// Rate constant: `exp(intercept)` under log-log, minus the slope otherwise.
    pub c_hat: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub r_squared: f64,
    pub n_grid: Vec<f64>,
    pub transform: Transform,
}

/// Fits `(n, log p)` pairs.
pub fn fit_exponent(points: &[(f64, f64)], transform: Transform) -> Result<ExponentFit> {
    if points.len() < 4 {
        return Err(Error::BadFit(format!("need at least 4 grid points, got {}", points.len())));
    }
    if let Some(&(n, lp)) = points.iter().find(|(_, lp)| !lp.is_finite() || *lp > 0.0) {
        return Err(Error::BadFit(format!("log p = {lp} at n = {n}; every estimate must be positive")));
    }
    let xy: Vec<(f64, f64)> = match transform {
        Transform::LogLog => {
            if let Some(&(n, _)) = points.iter().find(|(_, lp)| *lp == 0.0) {
                return Err(Error::BadFit(format!("p = 1 at n = {n} has no log-log image")));
            }
            points.iter().map(|&(n, lp)| (n.ln(), (-lp).ln())).collect()
        }
        Transform::LogVsNZeta { zeta } => points.iter().map(|&(n, lp)| (n.powf(zeta), lp)).collect(),
        Transform::LogVsSqrtN => points.iter().map(|&(n, lp)| (n.sqrt(), lp)).collect(),
    };
    let LinearFit {
        slope,
        intercept,
        slope_se,
        r_squared,
    } = linear_fit(&xy)?;
    let (zeta_hat, c_hat) = match transform {
        Transform::LogLog => (Some(slope), intercept.exp()),
        _ => (None, -slope),
    };
    Ok(ExponentFit {
        zeta_hat,
        c_hat,
        slope,
        slope_se,
        r_squared: r_squared.clamp(0.0, 1.0),
        n_grid: points.iter().map(|p| p.0).collect(),
        transform,
    })
}

impl ExponentFit {
    /// Fit over `(n, estimate)` pairs.
    pub fn from_estimates(estimates: &[(f64, TailEstimate)], transform: Transform) -> Result<Self> {
        let pts: Vec<(f64, f64)> = estimates.iter().map(|(n, e)| (*n, e.log_p)).collect();
        fit_exponent(&pts, transform)
    }
}
