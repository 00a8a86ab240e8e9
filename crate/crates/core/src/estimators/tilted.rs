use super::{Method, TailEstimate};
use crate::error::{Error, Result};
use crate::lattice::LocalTimeField;
use crate::rng;
use crate::scenery::{SceneryFamily, SceneryModel, TiltedSampler};
use crate::stats::{mean_se, Running};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::collections::BTreeMap;

/// `P_eta(X_n >= threshold | walk)` for a centered gaussian scenery with the
/// given variance, where `silt = sum_x l_n(x)^2`.
pub fn gaussian_conditional_tail(silt: f64, variance: f64, threshold: f64) -> f64 {
    0.5 * erfc(threshold / (2.0 * variance * silt).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TiltedParams {
    /// Fixed tilt `t`; when absent it is solved per walk so the tilted mean
    /// of `X_n` equals the threshold.
    #[serde(default)]
    pub tilt: Option<f64>,
    pub draws_per_walk: u64,
    /// Sample the gaussian family too instead of using its exact tail.
    #[serde(default)]
    pub force_monte_carlo: bool,
}

impl Default for TiltedParams {
    fn default() -> Self {
        Self {
            tilt: None,
            draws_per_walk: 1000,
            force_monte_carlo: false,
        }
    }
}

fn count_histogram(f: &LocalTimeField) -> BTreeMap<u32, u64> {
    let mut h = BTreeMap::new();
    for c in f.counts() {
        *h.entry(c).or_insert(0) += 1;
    }
    h
}

/// Tilted mean `sum_x l(x) Lambda'(t l(x))` over a count histogram.
fn tilted_mean(model: &SceneryModel, hist: &BTreeMap<u32, u64>, t: f64) -> Result<f64> {
    let mut m = 0.0;
    for (&l, &k) in hist {
        m += k as f64 * l as f64 * model.tilted_mean(t * l as f64)?;
    }
    Ok(m)
}

/// Largest usable tilt for the model, given the largest count.
fn tilt_limit(model: &SceneryModel, max_count: u32) -> Result<f64> {
    let a = model.tail_exponent();
    if a < 1.0 {
        return Err(Error::Divergent { t: f64::MIN_POSITIVE });
    }
    Ok(if a == 1.0 {
        model.tail_constant() / max_count as f64
    } else {
        f64::INFINITY
    })
}

/// Solves `sum_x l(x) Lambda'(t l(x)) = target` for `t >= 0`.
pub fn solve_tilt(model: &SceneryModel, field: &LocalTimeField, target: f64) -> Result<f64> {
    if target <= 0.0 {
        return Ok(0.0);
    }
    let hist = count_histogram(field);
    let limit = tilt_limit(model, field.max_count().max(1))?;
    let (mut lo, mut hi) = (0.0, 1.0f64.min(0.5 * limit));
    while tilted_mean(model, &hist, hi)? < target {
        lo = hi;
        hi = if limit.is_finite() { 0.5 * (hi + limit) } else { 2.0 * hi };
        if hi > 1e8 || (limit.is_finite() && limit - hi < 1e-12 * limit) {
            return Err(Error::param("y", format!("threshold {target} is beyond the reach of any tilt")));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if tilted_mean(model, &hist, mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Effective sample size of the contributing weights below which the
/// estimate is declared degenerate.
const MIN_EFFECTIVE_SAMPLES: f64 = 5.0;

fn conditional_estimate(
    field: &LocalTimeField,
    model: &SceneryModel,
    threshold: f64,
    params: &TiltedParams,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    if model.family == SceneryFamily::Gaussian && !params.force_monte_carlo {
        let silt = crate::silt::silt(field) as f64;
        return Ok((gaussian_conditional_tail(silt, model.variance, threshold), 0.0, 0.0));
    }
    if model.family == SceneryFamily::SymmetricBounded {
        let reach = (3.0 * model.variance).sqrt() * field.total_mass() as f64;
        if threshold > reach {
            return Ok((0.0, 0.0, 0.0));
        }
    }
    let t = match params.tilt {
        Some(t) => t,
        None => solve_tilt(model, field, threshold)?,
    };
    let hist = count_histogram(field);
    let samplers: BTreeMap<u32, TiltedSampler> = hist
        .keys()
        .map(|&l| TiltedSampler::new(model, t * l as f64).map(|s| (l, s)))
        .collect::<Result<_>>()?;
    let counts: Vec<u32> = {
        let mut c: Vec<u32> = field.counts().collect();
        c.sort_unstable();
        c
    };
    let mut r = rng::seeded(seed);
    let mut acc = Running::default();
    let (mut sw, mut sw2) = (0.0, 0.0);
    for _ in 0..params.draws_per_walk {
        let mut x = 0.0;
        let mut log_w = 0.0;
        for &l in &counts {
            let (eta, lw) = samplers[&l].sample(&mut r);
            x += l as f64 * eta;
            log_w += lw;
        }
        let w = if x >= threshold { log_w.exp() } else { 0.0 };
        sw += w;
        sw2 += w * w;
        acc.push(w);
    }
    if params.tilt == Some(0.0) {
        return Ok((acc.mean(), acc.std_err(), 0.0));
    }
    let ess = if sw2 > 0.0 { sw * sw / sw2 } else { 0.0 };
    if !(ess >= MIN_EFFECTIVE_SAMPLES) {
        return Err(Error::DegenerateWeights(format!(
            "effective sample size {ess:.2} of {} draws at tilt {t}",
            params.draws_per_walk
        )));
    }
    Ok((acc.mean(), acc.std_err(), t))
}

/// Estimates `P(X_n >= n^beta y)` averaged over the given walks, each with
/// an importance-sampled scenery.
pub fn tilted_scenery_tail(
    walks: &[LocalTimeField],
    model: &SceneryModel,
    beta: f64,
    y: f64,
    params: &TiltedParams,
    seed: u64,
) -> Result<TailEstimate> {
    if walks.is_empty() {
        return Err(Error::param("walks", "need at least one walk"));
    }
    let model = model.clone().validated()?;
    let per_walk: Vec<(f64, f64, f64)> = walks
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let threshold = (f.steps() as f64).powf(beta) * y;
            conditional_estimate(f, &model, threshold, params, rng::derive_seed(seed, i as u64))
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = per_walk.iter().map(|v| v.0).collect();
    let (mean, se) = if values.len() > 1 {
        mean_se(&values)
    } else {
        (per_walk[0].0, per_walk[0].1)
    };
    let mean_tilt = per_walk.iter().map(|v| v.2).sum::<f64>() / per_walk.len() as f64;
    Ok(
        TailEstimate::from_mean(mean, se, walks.len() as u64 * params.draws_per_walk.max(1), Method::TiltedScenery)
            .with_param("beta", beta)
            .with_param("y", y)
            .with_param("mean_tilt", mean_tilt),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{local_times_streaming, Site};

    fn walks(d: usize, n: u64, m: u64, seed: u64) -> Vec<LocalTimeField> {
        (0..m).map(|i| local_times_streaming(d, n, rng::derive_seed(seed, i)).unwrap()).collect()
    }

    #[test]
    fn gaussian_tail_and_chernoff() {
        assert!((gaussian_conditional_tail(4.0, 1.0, 0.0) - 0.5).abs() < 1e-15);
        for f in walks(3, 300, 20, 1) {
            let s = crate::silt::silt(&f) as f64;
            let t = 300f64.powf(0.8);
            let p = gaussian_conditional_tail(s, 1.0, t);
            assert!(p <= (-t * t / (2.0 * s)).exp());
        }
    }

    #[test]
    fn tilted_gaussian_matches_exact() {
        let m = SceneryModel::gaussian(1.0, 0).unwrap();
        let w = walks(3, 200, 100, 2);
        let exact = tilted_scenery_tail(&w, &m, 0.9, 1.5, &TiltedParams::default(), 1).unwrap();
        let mc = tilted_scenery_tail(
            &w,
            &m,
            0.9,
            1.5,
            &TiltedParams {
                force_monte_carlo: true,
                draws_per_walk: 400,
                ..Default::default()
            },
            1,
        )
        .unwrap();
        // Same walks, so compare per-walk sampling error only.
        let inner: f64 = w
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let p = TiltedParams { force_monte_carlo: true, draws_per_walk: 400, ..Default::default() };
                let t = 200f64.powf(0.9) * 1.5;
                conditional_estimate(f, &m, t, &p, rng::derive_seed(1, i as u64)).unwrap().1.powi(2)
            })
            .sum::<f64>()
            .sqrt()
            / w.len() as f64;
        assert!((mc.p_hat - exact.p_hat).abs() < 3.0 * inner, "{} vs {} ({inner})", mc.p_hat, exact.p_hat);
        assert!(exact.p_hat < 1e-3);
    }

    #[test]
    fn zero_tilt_is_plain_conditional_monte_carlo() {
        let m = SceneryModel::weibull(1.5, 1.0, 0).unwrap();
        let f = local_times_streaming(3, 100, 4).unwrap();
        let p = TiltedParams { tilt: Some(0.0), draws_per_walk: 20_000, force_monte_carlo: false };
        let t = 100f64.powf(0.6) * 0.5;
        let (est, se, _) = conditional_estimate(&f, &m, t, &p, 3).unwrap();
        // The same stream drives the untilted sampler site by site.
        let mut r = rng::seeded(3);
        let mut counts: Vec<u32> = f.counts().collect();
        counts.sort_unstable();
        let hits = (0..20_000)
            .filter(|_| counts.iter().map(|&l| l as f64 * m.draw(&mut r)).sum::<f64>() >= t)
            .count();
        assert!((est - hits as f64 / 20_000.0).abs() < 1e-12);
        assert!(se > 0.0);
    }

    /// `P(eta_1 + 2 eta_2 + 3 eta_3 >= t)` for uniform `eta`, discretizing
    /// the first two variables and integrating the third exactly.
    fn three_site_oracle(a: f64, t: f64) -> f64 {
        let k = 400;
        let h = 2.0 * a / k as f64;
        let grid: Vec<f64> = (0..k).map(|i| -a + (i as f64 + 0.5) * h).collect();
        let mut p = 0.0;
        for &u in &grid {
            for &v in &grid {
                // eta_3 >= (t - u - 2v) / 3, exactly.
                let lo = ((t - u - 2.0 * v) / 3.0).clamp(-a, a);
                p += (a - lo) / (2.0 * a);
            }
        }
        p / (k * k) as f64
    }

    #[test]
    fn unbiased_on_three_sites() {
        let m = SceneryModel::bounded(1.0, 0).unwrap();
        let a = 3f64.sqrt();
        let f = LocalTimeField::from_counts(3, [(Site::new(&[0, 0, 0]), 1), (Site::new(&[1, 0, 0]), 2), (Site::new(&[2, 0, 0]), 3)]);
        let t = 7.0;
        let exact = three_site_oracle(a, t);
        let p = TiltedParams { tilt: None, draws_per_walk: 200_000, force_monte_carlo: false };
        let (est, se, tilt) = conditional_estimate(&f, &m, t, &p, 8).unwrap();
        assert!(tilt > 0.0);
        assert!((est - exact).abs() < 3.0 * se + 1e-4, "{est} vs {exact} ({se})");
    }

    #[test]
    fn solves_the_tilt_equation() {
        let m = SceneryModel::exp_power(1.5, 1.0, 0).unwrap();
        let f = local_times_streaming(3, 200, 7).unwrap();
        let target = 200f64.powf(0.9);
        let t = solve_tilt(&m, &f, target).unwrap();
        let hist = count_histogram(&f);
        assert!((tilted_mean(&m, &hist, t).unwrap() / target - 1.0).abs() < 1e-9);
        assert_eq!(solve_tilt(&m, &f, -1.0).unwrap(), 0.0);
        let heavy = SceneryModel::weibull(0.5, 1.0, 0).unwrap();
        assert!(solve_tilt(&heavy, &f, target).is_err());
    }

    #[test]
    fn aggressive_fixed_tilt_is_reported() {
        let m = SceneryModel::exp_power(1.5, 1.0, 0).unwrap();
        let f = local_times_streaming(3, 2000, 7).unwrap();
        let p = TiltedParams { tilt: Some(30.0), draws_per_walk: 50, force_monte_carlo: false };
        assert!(matches!(conditional_estimate(&f, &m, 10.0, &p, 1), Err(Error::DegenerateWeights(_))));
    }
}
