//! Estimators of the deviation probabilities and their exponents.

mod bounds;
mod confinement;
mod enumerate;
mod fit;
mod naive;
mod splitting;
mod tilted;

pub use bounds::{localization_lower_bound, lower_bound_return_chain, LocalizationParams};
pub use confinement::{confinement_probability, spectral_gap, ConfinementMethod, SmcParams};
pub use enumerate::{empirical_law, enumerate_exact, ExactLaw, Functional, MAX_ENUMERATED_PATHS};
pub use fit::{fit_exponent, ExponentFit, Transform};
pub use naive::{decomposition_check, naive_tail, weighted_sum_tail, Decomposition, Event};
pub use splitting::{splitting_tail, SplittingParams};
pub use tilted::{gaussian_conditional_tail, solve_tilt, tilted_scenery_tail, TiltedParams};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Naive,
    TiltedScenery,
    Splitting,
    StrategyLowerBound,
    ExactSpectral,
    Enumeration,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::TiltedScenery => "tilted-scenery",
            Method::Splitting => "splitting",
            Method::StrategyLowerBound => "strategy-lower-bound",
            Method::ExactSpectral => "exact-spectral",
            Method::Enumeration => "enumeration",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A probability estimate. `log_p` is carried separately because products
/// of many factors underflow long before their logarithm is inaccurate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub log_p: f64,
    pub n_samples: u64,
    pub method: Method,
    pub params: BTreeMap<String, f64>,
}

impl TailEstimate {
    /// Frequency estimate with its binomial standard error.
    pub fn from_counts(hits: u64, samples: u64, method: Method) -> Self {
        let p = if samples == 0 { 0.0 } else { hits as f64 / samples as f64 };
        Self {
            p_hat: p,
            std_err: if samples == 0 { f64::INFINITY } else { (p * (1.0 - p) / samples as f64).sqrt() },
            log_p: p.ln(),
            n_samples: samples,
            method,
            params: BTreeMap::new(),
        }
    }

    pub fn exact(p: f64, method: Method) -> Self {
        Self::from_log(p.ln(), 0.0, 0, method)
    }

    /// Estimate given in log scale with the standard error of `log_p`.
    pub fn from_log(log_p: f64, log_se: f64, samples: u64, method: Method) -> Self {
        let log_p = log_p.min(0.0);
        let p = log_p.exp();
        Self {
            p_hat: p,
            std_err: p * log_se,
            log_p,
            n_samples: samples,
            method,
            params: BTreeMap::new(),
        }
    }

    /// Estimate from a mean of unbiased per-sample values in `[0, 1]`.
    pub fn from_mean(mean: f64, std_err: f64, samples: u64, method: Method) -> Self {
        let p = mean.clamp(0.0, 1.0);
        Self {
            p_hat: p,
            std_err,
            log_p: p.ln(),
            n_samples: samples,
            method,
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    /// Standard error of `log_p` by the delta method.
    pub fn log_std_err(&self) -> f64 {
        if self.p_hat > 0.0 {
            self.std_err / self.p_hat
        } else {
            f64::INFINITY
        }
    }

    /// `|self - other| <= k * sqrt(se_1^2 + se_2^2)`.
    pub fn agrees_with(&self, other: &TailEstimate, k: f64) -> bool {
        (self.p_hat - other.p_hat).abs() <= k * self.std_err.hypot(other.std_err)
    }
}
