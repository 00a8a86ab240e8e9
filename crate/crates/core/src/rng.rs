//! Reproducible random streams.
//!
//! Every replica draws from its own generator seeded by
//! `derive_seed(master, replica_index)`, so a parallel fan-out produces the
//! same numbers regardless of scheduling.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `index` under `master`.
#[inline]
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

pub fn stream(master: u64, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, index))
}

pub fn seeded(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

/// Maps 64 random bits to the open interval (0, 1).
#[inline]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Uniform draws from `0..choices` using Lemire's multiply-and-reject on
/// 16-bit chunks, four draws per 64-bit word. The law is exactly uniform and
/// rejections are rare enough to keep the branch predictable.
#[derive(Debug, Clone)]
pub struct ChoiceSampler {
    choices: u32,
    threshold: u32,
    buf: u64,
    chunks_left: u32,
}

impl ChoiceSampler {
    pub fn new(choices: u32) -> Self {
        assert!((1..=1 << 16).contains(&choices));
        Self {
            choices,
            threshold: ((1u32 << 16) - choices) % choices,
            buf: 0,
            chunks_left: 0,
        }
    }

    pub fn choices(&self) -> u32 {
        self.choices
    }

    #[inline]
    pub fn sample<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> u32 {
        loop {
            if self.chunks_left == 0 {
                self.buf = rng.next_u64();
                self.chunks_left = 4;
            }
            let chunk = (self.buf & 0xFFFF) as u32;
            self.buf >>= 16;
            self.chunks_left -= 1;
            let m = chunk * self.choices;
            if (m & 0xFFFF) >= self.threshold {
                return m >> 16;
            }
        }
    }
}
