//! Seeded, language-portable random streams.
//!
//! Every stream is xoshiro256** seeded through splitmix64, and every derived
//! quantity (bounded integers, unit floats, normals) is computed here with a
//! fixed recipe so another implementation can reproduce splits and forests
//! bit-for-bit.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// One splitmix64 output step applied to `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the `stream`-th substream of `seed`.
pub fn substream_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream.wrapping_add(1)))
}

#[derive(Debug, Clone)]
pub struct Stream(Xoshiro256StarStar);

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream(Xoshiro256StarStar::seed_from_u64(seed))
    }

    pub fn substream(seed: u64, stream: u64) -> Self {
        Self::new(substream_seed(seed, stream))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform integer in `0..n` by rejection (no modulo bias).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n + 1) % n;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return (x % n) as usize;
            }
        }
    }

    /// Uniform in [0, 1) with 53 bits of resolution.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Standard normal via Box-Muller (one draw per call, the sine half is discarded).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// In-place Fisher-Yates, walking from the last slot down.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
