use super::{Method, TailEstimate};
use crate::error::{Error, Result};
use crate::lattice::{check_dim, local_times_streaming, LocalTimeField, Move, Site, Walker};
use crate::silt::silt;
use crate::rng;
use crate::stats::log_sum_exp;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Adaptive multilevel splitting on walk prefixes. A prefix of length `k`
/// has importance `Q (n + 1 + 2 pairs_k) + P (n - k)`, where `pairs_k`
/// counts its coincidence pairs and `P / Q` is 1.5 times the typical growth
/// rate of `2 pairs_k` from a pilot run, so typical paths lose importance. At `k = n` it is `Q sum_x l_n(x)^2`.
/// A particle's score is the running maximum of the importance. At each
/// iteration the particles at or below the `kill`-th smallest score are
/// resampled from survivors, branched where the survivor first exceeds that
/// level. The final estimate counts the particles whose own `sum l^2`
/// reaches the target; ties count as killed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplittingParams {
    pub particles: usize,
    /// Fraction of the population killed per iteration (at least one).
    pub kill_fraction: f64,
    /// Independent splitting runs; their spread gives the standard error.
    pub runs: usize,
    pub max_iterations: u64,
}

impl Default for SplittingParams {
    fn default() -> Self {
        Self {
            particles: 500,
            kill_fraction: 0.1,
            runs: 8,
            max_iterations: 1_000_000,
        }
    }
}

#[derive(Clone)]
struct Particle {
    moves: Vec<Move>,
    score: u64,
    silt: u64,
}

/// Importance of a prefix as `Q (k + 1 + 2 pairs) + P (n - k) + Q (n - k)`;
/// all integers so ties stay exact.
#[derive(Clone, Copy, Debug)]
struct Importance {
    n: u64,
    p: u64,
    q: u64,
}

const RATE_DENOMINATOR: u64 = 1024;
const PILOT_WALKS: u64 = 64;
const RATE_MULTIPLIER: f64 = 1.5;

impl Importance {
    fn new(n: usize, rate: f64) -> Self {
        Self {
            n: n as u64,
            p: (rate.max(0.0) * RATE_DENOMINATOR as f64).round() as u64,
            q: RATE_DENOMINATOR,
        }
    }

    fn at(&self, k: u64, silt_k: u64) -> u64 {
        self.q * (silt_k + self.n - k) + self.p * (self.n - k)
    }
}

/// Mean of `(sum l_n^2 - n - 1) / n` over independent walks.
fn pilot_rate(d: usize, n: usize, seed: u64) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let total: u64 = (0..PILOT_WALKS)
        .into_par_iter()
        .map(|i| local_times_streaming(d, n as u64, rng::derive_seed(seed, i)).map(|f| silt(&f) - n as u64 - 1))
        .sum::<Result<u64>>()?;
    Ok(total as f64 / (PILOT_WALKS * n as u64) as f64)
}

/// Runs the walk from the state after `prefix` to `n` steps.
fn grow(d: usize, imp: Importance, prefix: &[Move], seed: u64) -> Particle {
    let n = imp.n as usize;
    let mut field = LocalTimeField::with_capacity(d, n + 1);
    let mut pos = Site::origin(d);
    let mut silt_k = u64::from(field.record(&pos));
    let mut score = imp.at(0, silt_k);
    let mut moves = Vec::with_capacity(n);
    for &mv in prefix {
        pos.shift(mv);
        silt_k += u64::from(field.record(&pos)) * 2 - 1;
        moves.push(mv);
        score = score.max(imp.at(moves.len() as u64, silt_k));
    }
    let mut w = Walker::resume(pos, prefix.len() as u64, seed);
    while moves.len() < n {
        let mv = w.step();
        silt_k += u64::from(field.record(w.position())) * 2 - 1;
        moves.push(mv);
        score = score.max(imp.at(moves.len() as u64, silt_k));
    }
    Particle {
        moves,
        score,
        silt: silt_k,
    }
}

/// Length of the shortest prefix whose importance exceeds `level`.
fn branch_point(d: usize, imp: Importance, moves: &[Move], level: u64) -> usize {
    let mut field = LocalTimeField::with_capacity(d, moves.len() + 1);
    let mut pos = Site::origin(d);
    let mut silt_k = u64::from(field.record(&pos));
    if imp.at(0, silt_k) > level {
        return 0;
    }
    for (k, &mv) in moves.iter().enumerate() {
        pos.shift(mv);
        silt_k += u64::from(field.record(&pos)) * 2 - 1;
        if imp.at(k as u64 + 1, silt_k) > level {
            return k + 1;
        }
    }
    moves.len()
}

struct RunOutcome {
    log_p: f64,
    iterations: u64,
}

fn run_once(d: usize, imp: Importance, target: u64, params: &SplittingParams, seed: u64) -> Result<RunOutcome> {
    let np = params.particles;
    let mut fresh = 0u64;
    let mut next_seed = || {
        fresh += 1;
        rng::derive_seed(seed, fresh)
    };
    let seeds: Vec<u64> = (0..np).map(|_| next_seed()).collect();
    let mut pop: Vec<Particle> = seeds.into_par_iter().map(|s| grow(d, imp, &[], s)).collect();
    let kill = ((params.kill_fraction * np as f64).ceil() as usize).clamp(1, np);
    let stop = imp.q * target;
    let mut picker = rng::seeded(rng::derive_seed(seed, u64::MAX));
    let mut log_p = 0.0;
    let mut iterations = 0;
    loop {
        let mut scores: Vec<u64> = pop.iter().map(|p| p.score).collect();
        scores.sort_unstable();
        let level = scores[kill - 1];
        if level >= stop {
            break;
        }
        iterations += 1;
        if iterations > params.max_iterations {
            return Err(Error::param("max_iterations", format!("reached {} below level {target}", params.max_iterations)));
        }
        let survivors: Vec<usize> = (0..np).filter(|&i| pop[i].score > level).collect();
        if survivors.is_empty() {
            return Err(Error::Extinction {
                level: level as f64 / imp.q as f64,
            });
        }
        let killed: Vec<usize> = (0..np).filter(|&i| pop[i].score <= level).collect();
        log_p += (1.0 - killed.len() as f64 / np as f64).ln();
        let jobs: Vec<(usize, usize, u64)> = killed
            .iter()
            .map(|&i| (i, survivors[picker.random_range(0..survivors.len())], next_seed()))
            .collect();
        let pop_ref = &pop;
        let children: Vec<(usize, Particle)> = jobs
            .into_par_iter()
            .map(|(i, parent, s)| {
                let moves = &pop_ref[parent].moves;
                let cut = branch_point(d, imp, moves, level);
                (i, grow(d, imp, &moves[..cut], s))
            })
            .collect();
        for (i, child) in children {
            pop[i] = child;
        }
    }
    let hits = pop.iter().filter(|p| p.silt >= target).count();
    Ok(RunOutcome {
        log_p: log_p + (hits as f64 / np as f64).ln(),
        iterations,
    })
}

/// Estimates `P(sum_x l_n(x)^2 >= n y)`.
pub fn splitting_tail(d: usize, n: usize, y: f64, params: &SplittingParams, seed: u64) -> Result<TailEstimate> {
    check_dim(d)?;
    if params.particles < 2 || params.runs == 0 {
        return Err(Error::param("particles", "need at least 2 particles and 1 run"));
    }
    if !(params.kill_fraction > 0.0 && params.kill_fraction < 1.0) {
        return Err(Error::param("kill_fraction", "must lie in (0, 1)"));
    }
    let target = (n as f64 * y).ceil().max(0.0) as u64;
    let rate = pilot_rate(d, n, rng::derive_seed(seed, u64::MAX))?;
    let imp = Importance::new(n, RATE_MULTIPLIER * rate);
    let outcomes: Vec<RunOutcome> = (0..params.runs)
        .into_par_iter()
        .map(|r| run_once(d, imp, target, params, rng::derive_seed(seed, r as u64)))
        .collect::<Result<_>>()?;
    let logs: Vec<f64> = outcomes.iter().map(|o| o.log_p).collect();
    let r = logs.len() as f64;
    let log_mean = log_sum_exp(&logs) - r.ln();
    // Standard error of the mean relative to the mean, computed in log scale.
    let rel_se = if logs.len() > 1 && log_mean.is_finite() {
        let rel: Vec<f64> = logs.iter().map(|l| (l - log_mean).exp()).collect();
        let var = rel.iter().map(|x| (x - 1.0).powi(2)).sum::<f64>() / (r - 1.0);
        (var / r).sqrt()
    } else {
        f64::INFINITY
    };
    let iterations: u64 = outcomes.iter().map(|o| o.iterations).sum();
    let samples = (params.particles * params.runs) as u64;
    Ok(TailEstimate::from_log(log_mean, rel_se, samples, Method::Splitting)
        .with_param("d", d as f64)
        .with_param("n", n as f64)
        .with_param("y", y)
        .with_param("iterations", iterations as f64)
        .with_param("pilot_rate", rate)
        .with_param("log_std_err", rel_se))
}
