//! Simple symmetric nearest-neighbour walks on Z^d and their occupation data.
//!
//! A walk is stored as its sequence of moves; sites are reconstructed on
//! demand. Everything downstream can also be driven by a [`Walker`] that
//! never materializes the path.

use crate::error::{Error, Result};
use crate::rng::{self, ChoiceSampler, StreamRng};
use rand::RngCore;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use std::fmt;

pub type Coords = SmallVec<[i32; 8]>;

/// A point of the integer lattice.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(Coords);

impl Site {
    pub fn origin(d: usize) -> Self {
        Site(SmallVec::from_elem(0, d))
    }

    pub fn new(coords: &[i32]) -> Self {
        Site(SmallVec::from_slice(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i32] {
        &self.0
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn l1_norm(&self) -> u64 {
        self.0.iter().map(|&c| c.unsigned_abs() as u64).sum()
    }

    pub fn linf_norm(&self) -> u32 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|&c| (c as f64) * (c as f64)).sum()
    }

    /// Applies a move in place.
    #[inline]
    pub fn shift(&mut self, mv: Move) {
        self.0[mv.axis()] += mv.delta();
    }

    pub fn shifted(&self, mv: Move) -> Self {
        let mut s = self.clone();
        s.shift(mv);
        s
    }

    /// `self - other`, coordinatewise.
    pub fn sub(&self, other: &Site) -> Site {
        Site(self.0.iter().zip(other.0.iter()).map(|(a, b)| a - b).collect())
    }

    /// Canonical representative under the hyperoctahedral group:
    /// absolute values sorted in decreasing order.
    pub fn canonical(&self) -> Site {
        let mut c: Coords = self.0.iter().map(|x| x.abs()).collect();
        c.sort_unstable_by(|a, b| b.cmp(a));
        Site(c)
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0.as_slice())
    }
}

/// A unit step `±e_axis`, encoded as `2 * axis + negative`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Move(u8);

impl Move {
    pub fn new(axis: usize, positive: bool) -> Self {
        Move((2 * axis + usize::from(!positive)) as u8)
    }

    #[inline]
    pub fn from_code(code: u32) -> Self {
        Move(code as u8)
    }

    #[inline]
    pub fn code(self) -> u32 {
        self.0 as u32
    }

    #[inline]
    pub fn axis(self) -> usize {
        (self.0 >> 1) as usize
    }

    #[inline]
    pub fn delta(self) -> i32 {
        1 - 2 * (self.0 & 1) as i32
    }

    pub fn reversed(self) -> Self {
        Move(self.0 ^ 1)
    }

    /// All `2d` moves in code order.
    pub fn all(d: usize) -> impl Iterator<Item = Move> {
        (0..2 * d as u32).map(Move::from_code)
    }
}

pub fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidDimension(d));
    }
    if d > 127 {
        return Err(Error::UnsupportedDimension {
            d,
            reason: "moves are encoded in one byte",
        });
    }
    Ok(())
}

/// Streaming step generator for one walk started at the origin.
#[derive(Debug, Clone)]
pub struct Walker {
    pos: Site,
    rng: StreamRng,
    sampler: ChoiceSampler,
    steps: u64,
    nonzero: usize,
}

impl Walker {
    pub fn new(d: usize, seed: u64) -> Result<Self> {
        check_dim(d)?;
        Ok(Self::from_rng(d, rng::seeded(seed)))
    }

    pub(crate) fn from_rng(d: usize, rng: StreamRng) -> Self {
        Self {
            pos: Site::origin(d),
            rng,
            sampler: ChoiceSampler::new(2 * d as u32),
            steps: 0,
            nonzero: 0,
        }
    }

    /// Continues a walk from `pos` after `steps` steps with a fresh stream.
    pub fn resume(pos: Site, steps: u64, seed: u64) -> Self {
        let d = pos.dim();
        let nonzero = pos.coords().iter().filter(|&&c| c != 0).count();
        Self {
            pos,
            rng: rng::seeded(seed),
            sampler: ChoiceSampler::new(2 * d as u32),
            steps,
            nonzero,
        }
    }

    pub fn dim(&self) -> usize {
        self.pos.dim()
    }

    #[inline]
    pub fn step(&mut self) -> Move {
        let mv = Move::from_code(self.sampler.sample(&mut self.rng));
        let c = &mut self.pos.0[mv.axis()];
        let was_zero = *c == 0;
        *c += mv.delta();
        if was_zero {
            self.nonzero += 1;
        } else if *c == 0 {
            self.nonzero -= 1;
        }
        self.steps += 1;
        mv
    }

    /// Advances `m` steps at once by drawing the displacement from its exact
    /// law: axis counts are multinomial, signs binomial. The intermediate
    /// sites are not observed, so this is only useful when they do not
    /// matter (e.g. `m` smaller than the distance to a target).
    pub fn advance(&mut self, m: u64) {
        if m == 0 {
            return;
        }
        let d = self.dim();
        let mut left = m;
        for axis in 0..d {
            let on_axis = if axis + 1 == d {
                left
            } else {
                binomial(&mut self.rng, left, 1.0 / (d - axis) as f64)
            };
            left -= on_axis;
            if on_axis == 0 {
                continue;
            }
            let plus = binomial(&mut self.rng, on_axis, 0.5);
            let delta = (2 * plus) as i64 - on_axis as i64;
            let c = &mut self.pos.0[axis];
            let was_zero = *c == 0;
            *c = i32::try_from(*c as i64 + delta).expect("coordinate overflow");
            match (was_zero, *c == 0) {
                (true, false) => self.nonzero += 1,
                (false, true) => self.nonzero -= 1,
                _ => {}
            }
        }
        self.steps += m;
    }

    #[inline]
    pub fn position(&self) -> &Site {
        &self.pos
    }

    #[inline]
    pub fn at_origin(&self) -> bool {
        self.nonzero == 0
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    pub fn rng_mut(&mut self) -> &mut StreamRng {
        &mut self.rng
    }
}

fn binomial(rng: &mut StreamRng, n: u64, p: f64) -> u64 {
    use rand::distr::Distribution;
    rand_distr::Binomial::new(n, p)
        .expect("valid binomial parameters")
        .sample(rng)
}

/// Below this L1 distance the skip-ahead walkers step one at a time.
const SKIP_MIN_DISTANCE: u64 = 6;

/// Moves `w` until it is back at the origin or has taken `horizon` steps in
/// total, skipping stretches that cannot reach the origin.
fn run_until_origin(w: &mut Walker, horizon: u64) -> bool {
    while w.steps_taken() < horizon {
        let dist = w.position().l1_norm();
        let left = horizon - w.steps_taken();
        if dist > SKIP_MIN_DISTANCE {
            w.advance((dist - 1).min(left));
        } else {
            w.step();
            if w.at_origin() {
                return true;
            }
        }
    }
    false
}

/// A finite nearest-neighbour path `S_0 = 0, S_1, ..., S_n`.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    dim: usize,
    seed: u64,
    moves: Vec<Move>,
}

impl Trajectory {
    pub fn from_moves(dim: usize, moves: Vec<Move>, seed: u64) -> Result<Self> {
        check_dim(dim)?;
        if let Some(m) = moves.iter().find(|m| m.axis() >= dim) {
            return Err(Error::InvalidPath(format!("move {m:?} outside dimension {dim}")));
        }
        Ok(Self { dim, seed, moves })
    }

    /// Builds a trajectory from explicit sites; the first must be the origin
    /// and consecutive sites must be lattice neighbours.
    pub fn from_path(dim: usize, path: &[Site]) -> Result<Self> {
        check_dim(dim)?;
        let first = path
            .first()
            .ok_or_else(|| Error::InvalidPath("empty path".into()))?;
        if first.dim() != dim || !first.is_origin() {
            return Err(Error::InvalidPath("path must start at the origin".into()));
        }
        let mut moves = Vec::with_capacity(path.len() - 1);
        for (k, w) in path.windows(2).enumerate() {
            if w[1].dim() != dim {
                return Err(Error::InvalidPath(format!("site {k} has wrong dimension")));
            }
            let diff = w[1].sub(&w[0]);
            let nz: Vec<(usize, i32)> = diff
                .coords()
                .iter()
                .copied()
                .enumerate()
                .filter(|&(_, c)| c != 0)
                .collect();
            match nz.as_slice() {
                [(axis, delta)] if delta.abs() == 1 => moves.push(Move::new(*axis, *delta > 0)),
                _ => {
                    return Err(Error::InvalidPath(format!(
                        "sites {k} and {} are not neighbours",
                        k + 1
                    )))
                }
            }
        }
        Ok(Self {
            dim,
            seed: 0,
            moves,
        })
    }

    /// Convenience constructor for one-dimensional paths given as integers.
    pub fn from_1d(points: &[i32]) -> Result<Self> {
        let sites: Vec<Site> = points.iter().map(|&p| Site::new(&[p])).collect();
        Self::from_path(1, &sites)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.moves.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    /// Iterates over `S_0, ..., S_n`.
    pub fn sites(&self) -> Sites<'_> {
        Sites {
            pos: Site::origin(self.dim),
            moves: self.moves.iter(),
            started: false,
        }
    }

    pub fn path(&self) -> Vec<Site> {
        self.sites().collect()
    }

    pub fn endpoint(&self) -> Site {
        let mut s = Site::origin(self.dim);
        for &m in &self.moves {
            s.shift(m);
        }
        s
    }

    pub fn prefix(&self, k: usize) -> Trajectory {
        Trajectory {
            dim: self.dim,
            seed: self.seed,
            moves: self.moves[..k.min(self.moves.len())].to_vec(),
        }
    }
}

pub struct Sites<'a> {
    pos: Site,
    moves: std::slice::Iter<'a, Move>,
    started: bool,
}

impl Iterator for Sites<'_> {
    type Item = Site;

    fn next(&mut self) -> Option<Site> {
        if !self.started {
            self.started = true;
            return Some(self.pos.clone());
        }
        let m = self.moves.next()?;
        self.pos.shift(*m);
        Some(self.pos.clone())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rest = self.moves.len() + usize::from(!self.started);
        (rest, Some(rest))
    }
}

impl ExactSizeIterator for Sites<'_> {}

/// Simulates `n` steps of the walk in dimension `d`; the same `(d, n, seed)`
/// always yields the same path.
pub fn simulate_walk(d: usize, n: usize, seed: u64) -> Result<Trajectory> {
    let mut w = Walker::new(d, seed)?;
    let moves = (0..n).map(|_| w.step()).collect();
    Ok(Trajectory {
        dim: d,
        seed,
        moves,
    })
}

/// Packs a site into 64 bits with `64 / d` bits per coordinate, when every
/// coordinate fits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Packing {
    bits: u32,
    bias: i64,
}

impl Packing {
    fn for_dim(d: usize) -> Option<Self> {
        let bits = (64 / d.max(1) as u32).min(32);
        (bits >= 4).then(|| Self {
            bits,
            bias: 1i64 << (bits - 1),
        })
    }

    #[inline]
    fn encode(self, site: &Site) -> Option<u64> {
        let mut key = 0u64;
        for (i, &c) in site.coords().iter().enumerate() {
            let v = c as i64 + self.bias;
            if v < 0 || v >= 2 * self.bias {
                return None;
            }
            key |= (v as u64) << (self.bits * i as u32);
        }
        Some(key)
    }

    fn decode(self, d: usize, key: u64) -> Site {
        let mask = (1u64 << self.bits) - 1;
        Site(
            (0..d)
                .map(|i| (((key >> (self.bits * i as u32)) & mask) as i64 - self.bias) as i32)
                .collect(),
        )
    }
}

/// Sparse occupation field `x -> l_n(x)`.
///
/// Sites whose coordinates fit the packed encoding live in a `u64`-keyed
/// table; anything else falls back to a table keyed by [`Site`].
#[derive(Clone, Debug, Default)]
pub struct LocalTimeField {
    dim: usize,
    visits: u64,
    packing: Option<Packing>,
    packed: FxHashMap<u64, u32>,
    spill: FxHashMap<Site, u32>,
}

impl PartialEq for LocalTimeField {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.visits == other.visits && self.sorted() == other.sorted()
    }
}

impl LocalTimeField {
    /// Field with no recorded visit; the first `record` is time 0.
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            visits: 0,
            packing: Packing::for_dim(dim),
            packed: FxHashMap::default(),
            spill: FxHashMap::default(),
        }
    }

    pub fn with_capacity(dim: usize, sites: usize) -> Self {
        let mut f = Self::empty(dim);
        f.packed.reserve(sites);
        f
    }

    /// Field built from explicit counts. Intended for tests and oracles; the
    /// counts need not come from an actual path.
    pub fn from_counts<I: IntoIterator<Item = (Site, u32)>>(dim: usize, counts: I) -> Self {
        let mut f = Self::empty(dim);
        for (s, c) in counts {
            if c > 0 {
                f.visits += c as u64;
                *f.slot(&s) += c;
            }
        }
        f
    }

    #[inline]
    fn slot(&mut self, site: &Site) -> &mut u32 {
        match self.packing.and_then(|p| p.encode(site)) {
            Some(k) => self.packed.entry(k).or_insert(0),
            None => self.spill.entry(site.clone()).or_insert(0),
        }
    }

    /// Records one visit and returns the updated count at `site`.
    #[inline]
    pub fn record(&mut self, site: &Site) -> u32 {
        self.visits += 1;
        let c = self.slot(site);
        *c += 1;
        *c
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Horizon `n`; the field holds `n + 1` visits.
    pub fn steps(&self) -> u64 {
        self.visits.saturating_sub(1)
    }

    pub fn total_mass(&self) -> u64 {
        self.visits
    }

    #[inline]
    pub fn get(&self, site: &Site) -> u32 {
        match self.packing.and_then(|p| p.encode(site)) {
            Some(k) => self.packed.get(&k).copied().unwrap_or(0),
            None => self.spill.get(site).copied().unwrap_or(0),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Site, u32)> + '_ {
        let d = self.dim;
        let packing = self.packing;
        self.packed
            .iter()
            .map(move |(&k, &c)| (packing.expect("packed keys imply a packing").decode(d, k), c))
            .chain(self.spill.iter().map(|(s, &c)| (s.clone(), c)))
    }

    pub fn counts(&self) -> impl Iterator<Item = u32> + '_ {
        self.packed.values().chain(self.spill.values()).copied()
    }

    /// Number of distinct visited sites.
    pub fn support_size(&self) -> usize {
        self.packed.len() + self.spill.len()
    }

    pub fn max_count(&self) -> u32 {
        self.counts().max().unwrap_or(0)
    }

    /// Visits sorted by site, for deterministic output.
    pub fn sorted(&self) -> Vec<(Site, u32)> {
        let mut v: Vec<(Site, u32)> = self.iter().collect();
        v.sort_unstable();
        v
    }
}

pub fn local_times(t: &Trajectory) -> LocalTimeField {
    let mut f = LocalTimeField::with_capacity(t.dim(), t.steps() + 1);
    for s in t.sites() {
        f.record(&s);
    }
    f
}

/// Local times of a fresh walk without storing the path.
pub fn local_times_streaming(d: usize, n: u64, seed: u64) -> Result<LocalTimeField> {
    let mut w = Walker::new(d, seed)?;
    let mut f = LocalTimeField::with_capacity(d, (n as usize + 1).min(1 << 20));
    f.record(w.position());
    for _ in 0..n {
        w.step();
        f.record(w.position());
    }
    Ok(f)
}

pub fn range_size(f: &LocalTimeField) -> usize {
    f.support_size()
}

/// Integer half-width of the open box `]-r/2, r/2[^d`: a site is inside iff
/// every coordinate has absolute value at most `floor((r - 1) / 2)`.
pub fn box_half_width(r: u32) -> i32 {
    (r.saturating_sub(1) / 2) as i32
}

/// Number of lattice points per axis inside the box of side `r`.
pub fn box_points_per_axis(r: u32) -> usize {
    2 * box_half_width(r) as usize + 1
}

#[inline]
pub fn inside_box(site: &Site, half: i32) -> bool {
    site.coords().iter().all(|c| c.abs() <= half)
}

/// Exit time from the box and return times to the origin along one path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppingTimes {
    /// First `k` with `S_k` outside the box, if it happens by the horizon.
    pub sigma_r: Option<u64>,
    /// All `k >= 1` with `S_k = 0`, increasing.
    pub return_times: Vec<u64>,
}

impl StoppingTimes {
    /// `k`-th return time `T_0^(k)` (1-based), if it occurred.
    pub fn kth_return(&self, k: usize) -> Option<u64> {
        k.checked_sub(1).and_then(|i| self.return_times.get(i)).copied()
    }
}

pub fn stopping_times(t: &Trajectory, r: u32) -> Result<StoppingTimes> {
    if r < 1 {
        return Err(Error::param("r", "box side must be at least 1"));
    }
    let half = box_half_width(r);
    let mut sigma_r = None;
    let mut return_times = Vec::new();
    for (k, s) in t.sites().enumerate() {
        if sigma_r.is_none() && !inside_box(&s, half) {
            sigma_r = Some(k as u64);
        }
        if k > 0 && s.is_origin() {
            return_times.push(k as u64);
        }
    }
    Ok(StoppingTimes {
        sigma_r,
        return_times,
    })
}

/// First return time to the origin within `horizon` steps, streaming.
pub fn first_return_time(d: usize, horizon: u64, seed: u64) -> Result<Option<u64>> {
    let mut w = Walker::new(d, seed)?;
    for k in 1..=horizon {
        w.step();
        if w.at_origin() {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

/// `l_n(0)` for a fresh walk, streaming.
pub fn origin_local_time(d: usize, n: u64, seed: u64) -> Result<u64> {
    let mut w = Walker::new(d, seed)?;
    let mut visits = 1;
    for _ in 0..n {
        w.step();
        visits += u64::from(w.at_origin());
    }
    Ok(visits)
}

/// `l_n(0)` with exact skip-ahead; same law as [`origin_local_time`] but a
/// different use of the random stream.
pub fn origin_local_time_skipping(d: usize, n: u64, seed: u64) -> Result<u64> {
    let mut w = Walker::new(d, seed)?;
    let mut visits = 1;
    while run_until_origin(&mut w, n) {
        visits += 1;
    }
    Ok(visits)
}

/// Whether the walk returns to the origin within `horizon` steps, using
/// exact skip-ahead.
pub fn returns_within(d: usize, horizon: u64, seed: u64) -> Result<bool> {
    let mut w = Walker::new(d, seed)?;
    Ok(run_until_origin(&mut w, horizon))
}

/// Russian-roulette schedule for long-horizon visit counts: each time the
/// walk's L1 distance first exceeds `first_distance * 2^k`, it survives with
/// probability `survival` and later visits are up-weighted by its inverse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Roulette {
    pub first_distance: u64,
    pub survival: f64,
}

impl Default for Roulette {
    fn default() -> Self {
        Self {
            first_distance: 32,
            survival: 0.125,
        }
    }
}

/// Unbiased estimate of `E[l_n(0)]` from one walk with Russian roulette far
/// from the origin. Unlike the plain count it is a weighted value.
pub fn origin_visits_with_roulette(d: usize, n: u64, seed: u64, roulette: Roulette) -> Result<f64> {
    if !(roulette.survival > 0.0 && roulette.survival <= 1.0) {
        return Err(Error::param("survival", "must lie in (0, 1]"));
    }
    let mut w = Walker::new(d, seed)?;
    let mut weight = 1.0;
    let mut total = 1.0;
    let mut next_check = roulette.first_distance.max(1);
    for _ in 0..n {
        w.step();
        if w.at_origin() {
            total += weight;
        } else if w.position().l1_norm() >= next_check {
            next_check *= 2;
            if rng::open_unit(w.rng_mut().next_u64()) >= roulette.survival {
                break;
            }
            weight /= roulette.survival;
        }
    }
    Ok(total)
}

/// First exit time from the box of side `r` within `horizon` steps, streaming.
pub fn first_exit_time(d: usize, r: u32, horizon: u64, seed: u64) -> Result<Option<u64>> {
    let half = box_half_width(r);
    let mut w = Walker::new(d, seed)?;
    if !inside_box(w.position(), half) {
        return Ok(Some(0));
    }
    for k in 1..=horizon {
        let mv = w.step();
        if w.position().coords()[mv.axis()].abs() > half {
            return Ok(Some(k));
        }
    }
    Ok(None)
}
