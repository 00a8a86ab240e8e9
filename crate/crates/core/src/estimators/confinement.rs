use super::{Method, TailEstimate};
use crate::error::{Error, Result};
use crate::lattice::{box_half_width, box_points_per_axis, check_dim};
use crate::rng;
use crate::stats::log_sum_exp;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Population Monte Carlo for `P(sigma_r > T)`: all particles step, those
/// leaving the box die and are replaced by copies of survivors, and the
/// estimate is the product of the per-step survival fractions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmcParams {
    pub particles: usize,
    pub runs: usize,
    /// Also kill particles whose range exceeds this many sites.
    #[serde(default)]
    pub range_cap: Option<u64>,
}

impl Default for SmcParams {
    fn default() -> Self {
        Self {
            particles: 10_000,
            runs: 16,
            range_cap: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConfinementMethod {
    Mc(SmcParams),
    ExactSpectral,
}

/// `-log cos(pi / (L + 1))`, the decay rate of the survival probability.
pub fn spectral_gap(r: u32) -> f64 {
    let l = box_points_per_axis(r) as f64;
    -(std::f64::consts::PI / (l + 1.0)).cos().ln()
}

const MAX_SPECTRAL_TERMS: u128 = 100_000_000;

fn exact_spectral(d: usize, r: u32, t: u64) -> Result<f64> {
    let l = box_points_per_axis(r);
    let h = box_half_width(r) as usize;
    let terms = (l as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    if terms > MAX_SPECTRAL_TERMS {
        return Err(Error::param("r", format!("{terms} eigenmodes exceed the limit {MAX_SPECTRAL_TERMS}")));
    }
    let norm = (2.0 / (l as f64 + 1.0)).sqrt();
    let theta = |k: usize| std::f64::consts::PI * k as f64 / (l as f64 + 1.0);
    let phi = |k: usize, i: usize| norm * (theta(k) * (i + 1) as f64).sin();
    // Per-axis weight <e_h, phi_k> <phi_k, 1> and eigenvalue.
    let axis: Vec<(f64, f64)> = (1..=l)
        .map(|k| (phi(k, h) * (0..l).map(|i| phi(k, i)).sum::<f64>(), theta(k).cos()))
        .collect();
    let mut idx = vec![0usize; d];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        let mut lambda = 0.0;
        for &k in &idx {
            w *= axis[k].0;
            lambda += axis[k].1;
        }
        lambda /= d as f64;
        if w != 0.0 {
            total += w * lambda.abs().powf(t as f64) * if lambda < 0.0 && t % 2 == 1 { -1.0 } else { 1.0 };
        }
        let mut j = 0;
        loop {
            if j == d {
                return Ok(total.clamp(0.0, 1.0));
            }
            idx[j] += 1;
            if idx[j] < l {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

fn smc_run(d: usize, r: u32, t: u64, params: &SmcParams, seed: u64) -> f64 {
    let np = params.particles;
    let half = box_half_width(r);
    let side = box_points_per_axis(r);
    let mut rng = rng::seeded(seed);
    let mut pos = vec![0i32; np * d];
    // Visited-site bitsets, only when the range is capped.
    let cells = side.pow(d as u32);
    let words = if params.range_cap.is_some() { cells.div_ceil(64) } else { 0 };
    let mut seen = vec![0u64; np * words];
    let mut range = vec![1u64; np];
    let cell = |p: &[i32]| p.iter().fold(0usize, |acc, &c| acc * side + (c + half) as usize);
    if words > 0 {
        let c = cell(&pos[..d]);
        for i in 0..np {
            seen[i * words + c / 64] |= 1 << (c % 64);
        }
    }
    let mut alive = vec![true; np];
    let mut log_p = 0.0;
    for _ in 0..t {
        let mut survivors = Vec::with_capacity(np);
        for i in 0..np {
            let code = rng.random_range(0..2 * d);
            let c = &mut pos[i * d + code / 2];
            *c += if code % 2 == 0 { 1 } else { -1 };
            let mut ok = c.abs() <= half;
            if ok && words > 0 {
                let k = cell(&pos[i * d..(i + 1) * d]);
                let word = &mut seen[i * words + k / 64];
                if *word & (1 << (k % 64)) == 0 {
                    *word |= 1 << (k % 64);
                    range[i] += 1;
                    ok = range[i] <= params.range_cap.unwrap_or(u64::MAX);
                }
            }
            alive[i] = ok;
            if ok {
                survivors.push(i);
            }
        }
        if survivors.is_empty() {
            return f64::NEG_INFINITY;
        }
        log_p += (survivors.len() as f64 / np as f64).ln();
        for i in 0..np {
            if !alive[i] {
                let src = survivors[rng.random_range(0..survivors.len())];
                pos.copy_within(src * d..(src + 1) * d, i * d);
                if words > 0 {
                    seen.copy_within(src * words..(src + 1) * words, i * words);
                }
                range[i] = range[src];
            }
        }
    }
    log_p
}

/// `P(sigma_r > T)`: the walk stays in the box of side `r` up to time `T`.
pub fn confinement_probability(d: usize, r: u32, t: u64, method: &ConfinementMethod, seed: u64) -> Result<TailEstimate> {
    check_dim(d)?;
    if r < 2 {
        return Err(Error::param("r", "box side must be at least 2"));
    }
    let est = match method {
        ConfinementMethod::ExactSpectral => TailEstimate::exact(exact_spectral(d, r, t)?, Method::ExactSpectral),
        ConfinementMethod::Mc(params) => {
            if params.particles == 0 || params.runs == 0 {
                return Err(Error::param("particles", "need particles and runs"));
            }
            if t == 0 {
                TailEstimate::from_log(0.0, 0.0, params.particles as u64, Method::Splitting)
            } else {
                let logs: Vec<f64> = (0..params.runs)
                    .into_par_iter()
                    .map(|i| smc_run(d, r, t, params, rng::derive_seed(seed, i as u64)))
                    .collect();
                let n = logs.len() as f64;
                let log_mean = log_sum_exp(&logs) - n.ln();
                let rel_se = if logs.len() > 1 && log_mean.is_finite() {
                    let rel: Vec<f64> = logs.iter().map(|l| (l - log_mean).exp()).collect();
                    (rel.iter().map(|x| (x - 1.0).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
                } else {
                    f64::INFINITY
                };
                TailEstimate::from_log(log_mean, rel_se, (params.particles * params.runs) as u64, Method::Splitting)
                    .with_param("log_std_err", rel_se)
            }
        }
    };
    Ok(est
        .with_param("d", d as f64)
        .with_param("r", r as f64)
        .with_param("T", t as f64)
        .with_param("gap", spectral_gap(r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{naive_tail, Event};

    #[test]
    fn zero_time_is_certain() {
        for m in [ConfinementMethod::ExactSpectral, ConfinementMethod::Mc(SmcParams::default())] {
            assert_eq!(confinement_probability(5, 5, 0, &m, 1).unwrap().p_hat, 1.0);
        }
    }

    #[test]
    fn spectral_matches_hand_values() {
        // Side 3 box in d = 1: {-1, 0, 1}. From 0 the walk must come back each
        // second step: P(sigma > 2k) = 2^{-k}, P(sigma > 2k + 1) = 2^{-k}.
        for (t, p) in [(1, 1.0), (2, 0.5), (3, 0.5), (4, 0.25), (7, 0.125)] {
            assert!((exact_spectral(1, 3, t).unwrap() - p).abs() < 1e-12, "t={t}");
        }
        assert!(exact_spectral(3, 2, 1).unwrap().abs() < 1e-12);
    }

    /// Oracle: iterate the killed transition matrix on the box directly.
    fn power_iteration(d: usize, r: u32, t: u64) -> f64 {
        let side = box_points_per_axis(r);
        let n = side.pow(d as u32);
        let mut v = vec![1.0; n];
        for _ in 0..t {
            let mut next = vec![0.0; n];
            for (c, out) in next.iter_mut().enumerate() {
                let mut stride = 1;
                for _ in 0..d {
                    let coord = (c / stride) % side;
                    if coord > 0 {
                        *out += v[c - stride];
                    }
                    if coord + 1 < side {
                        *out += v[c + stride];
                    }
                    stride *= side;
                }
                *out /= 2.0 * d as f64;
            }
            v = next;
        }
        let centre: usize = (0..d).map(|j| (side / 2) * side.pow(j as u32)).sum();
        v[centre]
    }

    #[test]
    fn spectral_matches_power_iteration() {
        for (d, r, t) in [(2, 5, 30), (3, 4, 17), (3, 7, 60), (4, 5, 25)] {
            let a = exact_spectral(d, r, t).unwrap();
            let b = power_iteration(d, r, t);
            assert!((a / b - 1.0).abs() < 1e-9, "{d} {r} {t}: {a} vs {b}");
        }
    }

    #[test]
    fn smc_matches_naive_at_moderate_times() {
        let naive = naive_tail(&Event::Confinement { r: 7, t: 20 }, 3, 0, 100_000, 2).unwrap();
        let smc = confinement_probability(3, 7, 20, &ConfinementMethod::Mc(SmcParams { particles: 2000, runs: 16, range_cap: None }), 3).unwrap();
        let exact = exact_spectral(3, 7, 20).unwrap();
        assert!((naive.p_hat - exact).abs() < 3.0 * naive.std_err);
        assert!((smc.p_hat - exact).abs() < 3.0 * smc.std_err, "{smc:?} vs {exact}");
    }

    #[test]
    fn range_cap_reduces_survival() {
        let m = |cap| ConfinementMethod::Mc(SmcParams { particles: 2000, runs: 8, range_cap: cap });
        let free = confinement_probability(3, 5, 30, &m(None), 4).unwrap();
        let capped = confinement_probability(3, 5, 30, &m(Some(10)), 4).unwrap();
        assert!(capped.log_p < free.log_p);
        // A cap at the full box changes nothing.
        let full = confinement_probability(3, 5, 30, &m(Some(125)), 4).unwrap();
        assert_eq!(full.p_hat, free.p_hat);
    }
}
