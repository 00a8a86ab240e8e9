use super::{Functional, Method, TailEstimate};
use crate::error::{Error, Result};
use crate::lattice::{check_dim, first_exit_time, local_times_streaming, LocalTimeField};
use crate::rng;
use crate::scenery::{rwrs_value, SceneryField, SceneryModel};
use crate::silt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const SCENERY_SALT: u64 = 0x5CE7_E2A1_0000_0001;

/// Events whose probability [`naive_tail`] estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Event {
    /// `X_n >= n^beta y`, walk and scenery both random.
    Rwrs { beta: f64, y: f64, scenery: SceneryModel },
    /// `sum_x l_n(x)^p >= n^gamma y`.
    Silt { p: f64, gamma: f64, y: f64 },
    /// `|{x : n^b_low <= l_n(x) < n^b_high}| >= min_size`.
    LevelSet { b_low: f64, b_high: f64, min_size: u64 },
    /// `sigma_r > t`; the horizon `n` is ignored.
    Confinement { r: u32, t: u64 },
    /// `F >= threshold`.
    Functional { functional: Functional, threshold: u64 },
}

/// Scenery realization used by replica `i` of a run seeded with `seed`.
pub(crate) fn replica_scenery(model: &SceneryModel, seed: u64, i: u64) -> SceneryModel {
    model.with_seed(rng::derive_seed(seed ^ SCENERY_SALT, i))
}

fn occurs(event: &Event, d: usize, n: u64, seed: u64, i: u64) -> Result<bool> {
    let walk_seed = rng::derive_seed(seed, i);
    let field = || local_times_streaming(d, n, walk_seed);
    let nf = n as f64;
    Ok(match event {
        Event::Rwrs { beta, y, scenery } => {
            let s = SceneryField::new(replica_scenery(scenery, seed, i));
            rwrs_value(&field()?, &s) >= nf.powf(*beta) * y
        }
        Event::Silt { p, gamma, y } => silt::silt_p(&field()?, *p) >= nf.powf(*gamma) * y,
        Event::LevelSet { b_low, b_high, min_size } => {
            silt::level_set_size(&field()?, *b_low, *b_high) as u64 >= *min_size
        }
        Event::Confinement { r, t } => first_exit_time(d, *r, *t, walk_seed)?.is_none(),
        Event::Functional { functional, threshold } => functional.evaluate(&field()?) >= *threshold,
    })
}

pub fn naive_tail(event: &Event, d: usize, n: u64, replicas: u64, seed: u64) -> Result<TailEstimate> {
    check_dim(d)?;
    if replicas == 0 {
        return Err(Error::param("replicas", "need at least one replica"));
    }
    if let Event::Rwrs { scenery, .. } = event {
        scenery.clone().validated()?;
    }
    let hits = (0..replicas)
        .into_par_iter()
        .map(|i| occurs(event, d, n, seed, i).map(u64::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(TailEstimate::from_counts(hits, replicas, Method::Naive)
        .with_param("d", d as f64)
        .with_param("n", n as f64))
}

/// `P(sum_i w_i eta_i > y)` for i.i.d. `eta_i` drawn from `model`.
pub fn weighted_sum_tail(model: &SceneryModel, weights: &[f64], y: f64, draws: u64, seed: u64) -> Result<TailEstimate> {
    const BLOCK: u64 = 1 << 16;
    let model = model.clone().validated()?;
    let blocks = draws.div_ceil(BLOCK);
    let hits: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, b);
            let count = BLOCK.min(draws - b * BLOCK);
            (0..count)
                .filter(|_| weights.iter().map(|w| w * model.draw(&mut r)).sum::<f64>() > y)
                .count() as u64
        })
        .sum();
    Ok(TailEstimate::from_counts(hits, draws, Method::Naive))
}

/// Split of `X_n` over the high and low level sets at `n^b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// `P(X_n >= n^beta (y1 + y2))`.
    pub total: TailEstimate,
    /// `P(sum_{l_n(x) >= n^b} eta(x) l_n(x) >= n^beta y1)`.
    pub high: TailEstimate,
    /// `P(sum_{l_n(x) < n^b} eta(x) l_n(x) >= n^beta y2)`.
    pub low: TailEstimate,
}

impl Decomposition {
    /// `P(total) <= P(high) + P(low) + k sigma`.
    pub fn coherent(&self, k: f64) -> bool {
        let se = (self.total.std_err.powi(2) + self.high.std_err.powi(2) + self.low.std_err.powi(2)).sqrt();
        self.total.p_hat <= self.high.p_hat + self.low.p_hat + k * se
    }
}

fn split_sums(f: &LocalTimeField, s: &SceneryField, threshold: f64) -> (f64, f64) {
    let mut terms: Vec<_> = f.iter().collect();
    terms.sort_unstable();
    let (mut high, mut low) = (0.0, 0.0);
    for (x, c) in terms {
        let v = c as f64 * s.get(&x);
        if c as f64 >= threshold {
            high += v;
        } else {
            low += v;
        }
    }
    (high, low)
}

#[allow(clippy::too_many_arguments)]
pub fn decomposition_check(
    d: usize,
    n: u64,
    beta: f64,
    b: f64,
    y1: f64,
    y2: f64,
    model: &SceneryModel,
    replicas: u64,
    seed: u64,
) -> Result<Decomposition> {
    check_dim(d)?;
    let model = model.clone().validated()?;
    let scale = (n as f64).powf(beta);
    let threshold = silt::level_threshold(n, b);
    let flags: Vec<(bool, bool, bool)> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let f = local_times_streaming(d, n, rng::derive_seed(seed, i))?;
            let s = SceneryField::new(replica_scenery(&model, seed, i));
            let (high, low) = split_sums(&f, &s, threshold);
            Ok((high + low >= scale * (y1 + y2), high >= scale * y1, low >= scale * y2))
        })
        .collect::<Result<_>>()?;
    let count = |k: usize| {
        flags
            .iter()
            .filter(|f| match k {
                0 => f.0,
                1 => f.1,
                _ => f.2,
            })
            .count() as u64
    };
    Ok(Decomposition {
        total: TailEstimate::from_counts(count(0), replicas, Method::Naive),
        high: TailEstimate::from_counts(count(1), replicas, Method::Naive),
        low: TailEstimate::from_counts(count(2), replicas, Method::Naive),
    })
}
