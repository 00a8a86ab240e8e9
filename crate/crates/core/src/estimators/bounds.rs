use super::confinement::{confinement_probability, ConfinementMethod, SmcParams};
use super::{Method, TailEstimate};
use crate::error::{Error, Result};
use crate::exponents::PhasePoint;
use crate::lattice::{check_dim, returns_within};
use crate::rng;
use crate::scenery::SceneryModel;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Lower bound on `P(sum_x l_n(x)^2 >= n y)` from the event that the walk
/// makes `k = ceil(sqrt(n y)) - 1` returns to the origin, each within
/// `m = floor(n / k)` steps: then `l_n(0) >= sqrt(n y)`. The return
/// probability `q = P(T_0 <= m)` is estimated from `replicas` walks and the
/// bound is `q^k`.
pub fn lower_bound_return_chain(d: usize, n: u64, y: f64, replicas: u64, seed: u64) -> Result<TailEstimate> {
    check_dim(d)?;
    if d < 3 {
        return Err(Error::UnsupportedDimension { d, reason: "the return chain bound needs a transient walk" });
    }
    if replicas == 0 {
        return Err(Error::param("replicas", "need at least one replica"));
    }
    let need = ((n as f64 * y.max(0.0)).sqrt().ceil() as u64).saturating_sub(1);
    if need == 0 {
        return Ok(TailEstimate::exact(1.0, Method::StrategyLowerBound).with_param("k", 0.0));
    }
    let m = n / need;
    if m < 2 {
        return Ok(TailEstimate::exact(0.0, Method::StrategyLowerBound)
            .with_param("k", need as f64)
            .with_param("m", m as f64));
    }
    let hits: u64 = (0..replicas)
        .into_par_iter()
        .map(|i| returns_within(d, m, rng::derive_seed(seed, i)).map(u64::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let q = hits as f64 / replicas as f64;
    let q_se = (q * (1.0 - q) / replicas as f64).sqrt();
    let k = need as f64;
    let log_se = if q > 0.0 { k * q_se / q } else { f64::INFINITY };
    Ok(TailEstimate::from_log(k * q.ln(), log_se, replicas, Method::StrategyLowerBound)
        .with_param("k", k)
        .with_param("m", m as f64)
        .with_param("q", q)
        .with_param("q_std_err", q_se))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationParams {
    pub epsilon: f64,
    /// Scenery level `y` in `P(X_n >= y n^beta)`.
    pub y: f64,
    #[serde(default)]
    pub smc: SmcParams,
}

/// Region III lower bound: with `T = n^beta` and `r = T^{1/(d+2)}`,
/// `P(X_n >= y n^beta) >= P(eta > y)^{eps r^d} P(sigma_r > T, |R_T| <= eps r^d)`
/// for bell-shaped sceneries. The joint confinement probability is
/// estimated by population Monte Carlo; an extinct population or a range
/// cap below one site gives the vacuous bound 0.
pub fn localization_lower_bound(
    point: PhasePoint<f64>,
    n: u64,
    model: &SceneryModel,
    params: &LocalizationParams,
    seed: u64,
) -> Result<TailEstimate> {
    let d = point.d;
    check_dim(d)?;
    if !(point.beta > 0.5 && point.beta <= 1.0) {
        return Err(Error::param("beta", "localization bound needs 1/2 < beta <= 1"));
    }
    if !(params.epsilon > 0.0) || !(params.y > 0.0) {
        return Err(Error::param("epsilon", "epsilon and y must be positive"));
    }
    let model = model.clone().validated()?;
    if !model.is_bell_shaped() {
        return Err(Error::param("scenery", "the monotonicity step needs a bell-shaped density"));
    }
    let t = (n as f64).powf(point.beta).floor() as u64;
    let radius = (t as f64).powf(1.0 / (d as f64 + 2.0));
    let r = (radius.round() as u32).max(3);
    let sites = params.epsilon * radius.powi(d as i32);
    let cap = sites.floor() as u64;
    let eta_log = sites * model.tail_probability(params.y).ln();
    let base = TailEstimate::exact(0.0, Method::StrategyLowerBound)
        .with_param("T", t as f64)
        .with_param("r", r as f64)
        .with_param("range_cap", cap as f64)
        .with_param("eta_log_term", eta_log);
    if cap == 0 {
        return Ok(base.with_param("vacuous", 1.0));
    }
    let smc = SmcParams {
        range_cap: Some(cap),
        ..params.smc.clone()
    };
    let conf = confinement_probability(d, r, t, &ConfinementMethod::Mc(smc), seed)?;
    if !conf.log_p.is_finite() {
        return Ok(base.with_param("vacuous", 1.0));
    }
    let mut est = TailEstimate::from_log(eta_log + conf.log_p, conf.log_std_err(), conf.n_samples, Method::StrategyLowerBound);
    est.params = base.params;
    Ok(est
        .with_param("confinement_log_term", conf.log_p)
        .with_param("vacuous", 0.0))
}
