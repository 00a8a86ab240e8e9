//! Self-intersection local times, level sets, the dyadic strand
//! decomposition and intersections of two independent walks.

use crate::error::{Error, Result};
use crate::lattice::{local_times, LocalTimeField, Site, Trajectory, Walker};
use serde::{Deserialize, Serialize};

/// `sum_x l_n(x)^p`.
pub fn silt_p(f: &LocalTimeField, p: f64) -> f64 {
    f.counts().map(|c| (c as f64).powf(p)).sum()
}

/// `sum_x l_n(x)^2`, exactly.
pub fn silt(f: &LocalTimeField) -> u64 {
    f.counts().map(|c| c as u64 * c as u64).sum()
}

/// `#{0 <= k < k' <= n : S_k = S_k'}` as `sum_x C(l_n(x), 2)`.
pub fn coincidence_pairs(f: &LocalTimeField) -> u64 {
    f.counts().map(|c| c as u64 * (c as u64).saturating_sub(1) / 2).sum()
}

/// Same count by scanning all time pairs. Quadratic; meant for `n <= 10^3`.
pub fn coincidence_pairs_scan(t: &Trajectory) -> u64 {
    let path = t.path();
    let mut count = 0;
    for (k, a) in path.iter().enumerate() {
        count += path[k + 1..].iter().filter(|b| *b == a).count() as u64;
    }
    count
}

/// Same count by sorting the path and measuring runs of equal sites.
pub fn coincidence_pairs_sorted(t: &Trajectory) -> u64 {
    let mut path = t.path();
    path.sort_unstable();
    path.chunk_by(|a, b| a == b)
        .map(|run| (run.len() as u64) * (run.len() as u64 - 1) / 2)
        .sum()
}

/// `n + 1 + 2 * (coincidence pairs)`.
pub fn silt_from_pairs(n: u64, pairs: u64) -> u64 {
    n + 1 + 2 * pairs
}

/// Sites with `n^b_low <= l_n(x) < n^b_high`; for `b_high >= 1` the upper
/// threshold is dropped so the top set holds every heavily visited site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSet {
    pub b_low: f64,
    pub b_high: f64,
    pub n: u64,
    pub sites: Vec<(Site, u32)>,
}

impl LevelSet {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// `sum_{x in D} l_n(x)^2`.
    pub fn square_sum(&self) -> u64 {
        self.sites.iter().map(|(_, c)| *c as u64 * *c as u64).sum()
    }
}

pub fn level_threshold(n: u64, b: f64) -> f64 {
    (n as f64).powf(b)
}

fn in_level(c: u32, lo: f64, hi: Option<f64>) -> bool {
    let c = c as f64;
    c >= lo && hi.is_none_or(|h| c < h)
}

pub fn level_set(f: &LocalTimeField, b_low: f64, b_high: f64) -> Result<LevelSet> {
    if !(b_low >= 0.0 && b_low < b_high) {
        return Err(Error::param("b_low", format!("need 0 <= b_low < b_high, got [{b_low}, {b_high})")));
    }
    let n = f.steps();
    let lo = level_threshold(n, b_low);
    let hi = (b_high < 1.0).then(|| level_threshold(n, b_high));
    let mut sites: Vec<(Site, u32)> = f.iter().filter(|&(_, c)| in_level(c, lo, hi)).collect();
    sites.sort_unstable();
    Ok(LevelSet {
        b_low,
        b_high,
        n,
        sites,
    })
}

/// `|D_{b,a}|` without materializing the sites.
pub fn level_set_size(f: &LocalTimeField, b_low: f64, b_high: f64) -> usize {
    let n = f.steps();
    let lo = level_threshold(n, b_low);
    let hi = (b_high < 1.0).then(|| level_threshold(n, b_high));
    f.counts().filter(|&c| in_level(c, lo, hi)).count()
}

/// `|{x : l_n(x) >= t}|`.
pub fn sites_above(f: &LocalTimeField, t: u32) -> usize {
    f.counts().filter(|&c| c >= t).count()
}

/// One level of the dyadic decomposition of a walk of length `n = 2^N`
/// at threshold `n^b`. With `h = n/2`, the first and second halves are
/// read backwards and forwards from `S_h`, giving two independent strands.
#[derive(Clone, Debug)]
pub struct DyadicDecomposition {
    pub level: u32,
    pub b: f64,
    pub threshold: f64,
    /// `S_h`.
    pub midpoint: Site,
    /// Coincidence pairs on `{x : l_n(x) <= n^b}`.
    pub z0: u64,
    /// Coincidence pairs of each half walk on its own low set.
    pub z1: [u64; 2],
    /// `sum_x 1{l_h(x) <= n^b} l_h(x) l'(x)`, `l'` the second-half occupation.
    pub j1: u64,
    /// Occupation of `S_0..S_h` and of `S_h..S_n`.
    pub halves: [LocalTimeField; 2],
    /// Local times of `S_h - S_{h-k}` and `S_h - S_{h+k}`, `0 <= k <= h`.
    pub strands: [LocalTimeField; 2],
}

pub fn dyadic_level(n: u64) -> Result<u32> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NotDyadic(n));
    }
    Ok(n.trailing_zeros())
}

fn pairs(c: u32) -> u64 {
    c as u64 * (c as u64).saturating_sub(1) / 2
}

pub fn dyadic_decompose(t: &Trajectory, b: f64) -> Result<DyadicDecomposition> {
    let n = t.steps() as u64;
    let level = dyadic_level(n)?;
    if !(b > 0.0) {
        return Err(Error::param("b", "threshold exponent must be positive"));
    }
    let d = t.dim();
    let h = (n / 2) as usize;
    let path = t.path();
    let threshold = level_threshold(n, b);
    let low = |c: u32| c as f64 <= threshold;

    let full = local_times(t);
    let z0 = full.counts().filter(|&c| low(c)).map(pairs).sum();

    let mut first = LocalTimeField::with_capacity(d, h + 1);
    let mut second = LocalTimeField::with_capacity(d, h + 1);
    for s in &path[..=h] {
        first.record(s);
    }
    for s in &path[h..] {
        second.record(s);
    }
    let mid = path[h].clone();
    let mut strand1 = LocalTimeField::with_capacity(d, h + 1);
    let mut strand2 = LocalTimeField::with_capacity(d, h + 1);
    for k in 0..=h {
        strand1.record(&mid.sub(&path[h - k]));
        strand2.record(&mid.sub(&path[h + k]));
    }

    let z1 = [
        first.counts().filter(|&c| low(c)).map(pairs).sum(),
        second.counts().filter(|&c| low(c)).map(pairs).sum(),
    ];
    let j1 = first
        .iter()
        .filter(|&(_, c)| low(c))
        .map(|(x, c)| c as u64 * second.get(&x) as u64)
        .sum();
    Ok(DyadicDecomposition {
        level,
        b,
        threshold,
        midpoint: mid,
        z0,
        z1,
        j1,
        halves: [first, second],
        strands: [strand1, strand2],
    })
}

/// Outcome of the pathwise checks on one decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicChecks {
    /// `Z0 <= Z1_1 + Z1_2 + J1`.
    pub inequality: bool,
    /// `l_h(x) = l_{h,1}(S_h - x)` and `l'(x) = l_{h,2}(S_h - x)` sitewise,
    /// and the strand form of `Z1`, `J1` equals the direct one.
    pub strand_identity: bool,
    /// `Z1_1 >= (1/4) sum l_{h,1}^2` over the strand sites with
    /// `2 <= l_{h,1} <= n^b`, and likewise for the second strand.
    pub z1_quarter_bound: bool,
}

impl DyadicChecks {
    pub fn all(&self) -> bool {
        self.inequality && self.strand_identity && self.z1_quarter_bound
    }
}

impl DyadicDecomposition {
    pub fn checks(&self) -> DyadicChecks {
        let inequality = self.z0 <= self.z1[0] + self.z1[1] + self.j1;
        let low = |c: u32| c as f64 <= self.threshold;
        let mut strand_identity = true;
        for i in 0..2 {
            let (half, strand) = (&self.halves[i], &self.strands[i]);
            strand_identity &= half.support_size() == strand.support_size()
                && half.total_mass() == strand.total_mass()
                && half
                    .iter()
                    .all(|(x, c)| strand.get(&self.midpoint.sub(&x)) == c);
            let z1_strand: u64 = strand.counts().filter(|&c| low(c)).map(pairs).sum();
            strand_identity &= z1_strand == self.z1[i];
        }
        let j1_strand: u64 = self.strands[0]
            .iter()
            .filter(|&(_, c)| low(c))
            .map(|(x, c)| c as u64 * self.strands[1].get(&x) as u64)
            .sum();
        strand_identity &= j1_strand == self.j1;

        let z1_quarter_bound = (0..2).all(|i| {
            let squares: u64 = self.strands[i]
                .counts()
                .filter(|&c| c >= 2 && low(c))
                .map(|c| c as u64 * c as u64)
                .sum();
            4 * self.z1[i] >= squares
        });
        DyadicChecks {
            inequality,
            strand_identity,
            z1_quarter_bound,
        }
    }
}

/// `I_n = sum_x l_n(x) l~_n(x)` for two independent walks from the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoWalkIntersection {
    pub d: usize,
    pub n: u64,
    pub value: u64,
}

pub fn two_walk_intersection(seed1: u64, seed2: u64, d: usize, n: u64) -> Result<TwoWalkIntersection> {
    let first = crate::lattice::local_times_streaming(d, n, seed1)?;
    let mut w = Walker::new(d, seed2)?;
    let mut value = first.get(w.position()) as u64;
    for _ in 0..n {
        w.step();
        value += first.get(w.position()) as u64;
    }
    Ok(TwoWalkIntersection { d, n, value })
}

/// `I_n` at every horizon in `horizons` (ascending) for one pair of walks.
pub fn two_walk_intersection_profile(seed1: u64, seed2: u64, d: usize, horizons: &[u64]) -> Result<Vec<u64>> {
    if horizons.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::param("horizons", "must be ascending"));
    }
    let n = horizons.last().copied().unwrap_or(0);
    let mut w1 = Walker::new(d, seed1)?;
    let mut w2 = Walker::new(d, seed2)?;
    let mut l1 = LocalTimeField::with_capacity(d, (n as usize + 1).min(1 << 20));
    let mut l2 = LocalTimeField::with_capacity(d, (n as usize + 1).min(1 << 20));
    // Adding S_k and S~_k at time k adds l~_k(S_k) + l_k(S~_k) new pairs,
    // minus the double-counted pair when both land on the same site.
    let mut value = 0u64;
    let mut out = Vec::with_capacity(horizons.len());
    let mut next = horizons.iter().peekable();
    for k in 0..=n {
        if k > 0 {
            w1.step();
            w2.step();
        }
        let (a, b) = (w1.position(), w2.position());
        l1.record(a);
        l2.record(b);
        value += l2.get(a) as u64 + l1.get(b) as u64;
        if a == b {
            value -= 1;
        }
        while next.peek().is_some_and(|&&h| h == k) {
            out.push(value);
            next.next();
        }
    }
    Ok(out)
}

/// Upper bound on `m1 - E[I_n]` from the local limit theorem:
/// `m1 - E[I_n] <= 2 sum_{m > n} (m - n) p_m(0)` with
/// `p_m(0) ~ (d / (2 pi m))^{d/2}` on average over parities.
pub fn intersection_truncation_bound(d: usize, n: u64) -> f64 {
    let d = d as f64;
    let c = (d / (2.0 * std::f64::consts::PI)).powf(d / 2.0);
    let e = d / 2.0;
    let n = (n.max(1)) as f64;
    // int_n^inf (m - n) m^{-e} dm = n^{2-e} / ((e - 1)(e - 2)).
    2.0 * c * n.powf(2.0 - e) / ((e - 1.0) * (e - 2.0))
}

/// Margins of the Hölder interpolation and power-mean inequalities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationCheck {
    pub p: f64,
    pub q: f64,
    /// `(sum l^p)^{1/p}`.
    pub holder_lhs: f64,
    /// `(sum l)^theta (sum l^q)^{(1-theta)/q}`, `theta = 1 - q*/p*`.
    pub holder_rhs: f64,
    /// `((n + 1) / |R_n|)^p`.
    pub mean_lhs: f64,
    /// `sum l^p / |R_n|`.
    pub mean_rhs: f64,
}

const INTERPOLATION_SLACK: f64 = 1e-12;

impl InterpolationCheck {
    pub fn holder_holds(&self) -> bool {
        self.holder_lhs <= self.holder_rhs * (1.0 + INTERPOLATION_SLACK)
    }

    pub fn power_mean_holds(&self) -> bool {
        self.mean_lhs <= self.mean_rhs * (1.0 + INTERPOLATION_SLACK)
    }

    pub fn holds(&self) -> bool {
        self.holder_holds() && self.power_mean_holds()
    }
}

pub fn interpolation_check(f: &LocalTimeField, p: f64, q: f64) -> Result<InterpolationCheck> {
    let counts: Vec<f64> = f.counts().map(f64::from).collect();
    interpolation_check_counts(&counts, f.steps(), p, q)
}

/// As [`interpolation_check`] for raw counts claimed to come from a walk of
/// length `n`.
pub fn interpolation_check_counts(counts: &[f64], n: u64, p: f64, q: f64) -> Result<InterpolationCheck> {
    if !(1.0 < p && p < q) {
        return Err(Error::param("p", format!("need 1 < p < q, got p = {p}, q = {q}")));
    }
    let conj = |r: f64| r / (r - 1.0);
    let theta = 1.0 - conj(q) / conj(p);
    let s1: f64 = counts.iter().sum();
    let sp: f64 = counts.iter().map(|c| c.powf(p)).sum();
    let sq: f64 = counts.iter().map(|c| c.powf(q)).sum();
    let range = counts.iter().filter(|&&c| c > 0.0).count() as f64;
    Ok(InterpolationCheck {
        p,
        q,
        holder_lhs: sp.powf(1.0 / p),
        holder_rhs: s1.powf(theta) * sq.powf((1.0 - theta) / q),
        mean_lhs: ((n + 1) as f64 / range).powf(p),
        mean_rhs: sp / range,
    })
}

/// `kappa` such that `log p <= d L log(2n) - kappa t L^{1-2/d}` holds at
/// every `(n, t, L, log p)`; the largest such value, or `None` if no
/// positive one exists.
pub fn level_set_kappa(d: usize, points: &[(u64, f64, f64, f64)]) -> Option<f64> {
    let d = d as f64;
    let kappa = points
        .iter()
        .map(|&(n, t, l, log_p)| {
            (d * l * (2.0 * n as f64).ln() - log_p) / (t * l.powf(1.0 - 2.0 / d))
        })
        .fold(f64::INFINITY, f64::min);
    (kappa > 0.0 && kappa.is_finite()).then_some(kappa)
}
