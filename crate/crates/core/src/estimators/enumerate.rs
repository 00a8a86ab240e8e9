use crate::error::{Error, Result};
use crate::lattice::{check_dim, local_times_streaming, LocalTimeField, Move, Site};
use crate::rng;
use crate::silt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Largest `(2d)^n` accepted by [`enumerate_exact`].
pub const MAX_ENUMERATED_PATHS: u128 = 10_000_000;

/// Integer-valued functionals of a local-time field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Functional {
    /// `sum_x l_n(x)^p`.
    SiltP { p: u32 },
    Range,
    /// `|{x : n^b_low <= l_n(x) < n^b_high}|`.
    LevelSetSize { b_low: f64, b_high: f64 },
    /// Coincidence pairs on `{x : l_n(x) <= n^b}`.
    Z0 { b: f64 },
    OriginLocalTime,
    MaxLocalTime,
}

impl Functional {
    pub fn evaluate(&self, f: &LocalTimeField) -> u64 {
        match *self {
            Functional::SiltP { p } => f.counts().map(|c| (c as u64).pow(p)).sum(),
            Functional::Range => f.support_size() as u64,
            Functional::LevelSetSize { b_low, b_high } => silt::level_set_size(f, b_low, b_high) as u64,
            Functional::Z0 { b } => {
                let t = silt::level_threshold(f.steps(), b);
                f.counts()
                    .filter(|&c| c as f64 <= t)
                    .map(|c| c as u64 * (c as u64 - 1) / 2)
                    .sum()
            }
            Functional::OriginLocalTime => f.get(&Site::origin(f.dim())) as u64,
            Functional::MaxLocalTime => f.max_count() as u64,
        }
    }
}

/// Exact law of a functional over all `(2d)^n` equally likely paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactLaw {
    pub d: usize,
    pub n: usize,
    pub total_paths: u64,
    /// Value to number of paths.
    pub counts: BTreeMap<u64, u64>,
}

impl ExactLaw {
    pub fn probability(&self, value: u64) -> f64 {
        self.counts.get(&value).copied().unwrap_or(0) as f64 / self.total_paths as f64
    }

    /// `P(F >= value)`.
    pub fn tail(&self, value: u64) -> f64 {
        self.counts.range(value..).map(|(_, c)| *c).sum::<u64>() as f64 / self.total_paths as f64
    }

    pub fn mean(&self) -> f64 {
        self.counts.iter().map(|(v, c)| *v as f64 * *c as f64).sum::<f64>() / self.total_paths as f64
    }
}

fn visit(d: usize, path: &mut Vec<Site>, remaining: usize, functional: &Functional, out: &mut BTreeMap<u64, u64>) {
    if remaining == 0 {
        let f = LocalTimeField::from_counts(d, path.iter().map(|s| (s.clone(), 1)));
        *out.entry(functional.evaluate(&f)).or_insert(0) += 1;
        return;
    }
    for mv in Move::all(d) {
        let next = path.last().expect("path starts at the origin").shifted(mv);
        path.push(next);
        visit(d, path, remaining - 1, functional, out);
        path.pop();
    }
}

pub fn enumerate_exact(d: usize, n: usize, functional: Functional) -> Result<ExactLaw> {
    check_dim(d)?;
    let paths = (2 * d as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if paths > MAX_ENUMERATED_PATHS {
        return Err(Error::EnumerationTooLarge {
            paths,
            limit: MAX_ENUMERATED_PATHS,
        });
    }
    let starts: Vec<Vec<Site>> = if n == 0 {
        vec![vec![Site::origin(d)]]
    } else {
        Move::all(d)
            .map(|m| vec![Site::origin(d), Site::origin(d).shifted(m)])
            .collect()
    };
    let depth = n.saturating_sub(1);
    let partial: Vec<BTreeMap<u64, u64>> = starts
        .into_par_iter()
        .map(|mut path| {
            let mut out = BTreeMap::new();
            visit(d, &mut path, depth, &functional, &mut out);
            out
        })
        .collect();
    let mut counts = BTreeMap::new();
    for m in partial {
        for (v, c) in m {
            *counts.entry(v).or_insert(0) += c;
        }
    }
    Ok(ExactLaw {
        d,
        n,
        total_paths: paths as u64,
        counts,
    })
}

/// Monte Carlo frequencies of a functional over independent walks.
pub fn empirical_law(d: usize, n: u64, functional: Functional, replicas: u64, seed: u64) -> Result<BTreeMap<u64, u64>> {
    check_dim(d)?;
    let values: Vec<u64> = (0..replicas)
        .into_par_iter()
        .map(|i| local_times_streaming(d, n, rng::derive_seed(seed, i)).map(|f| functional.evaluate(&f)))
        .collect::<Result<_>>()?;
    let mut out = BTreeMap::new();
    for v in values {
        *out.entry(v).or_insert(0) += 1;
    }
    Ok(out)
}
