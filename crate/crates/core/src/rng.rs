//! Deterministic, serializable random streams.
//!
//! Everything that samples randomness in this crate owns a [`Pcg32`] seeded
//! through [`derive`], so independent concerns (exploration, frozen angles,
//! environment seeds, evaluation) never share a stream. All state is plain
//! data and round-trips through checkpoints, which is what makes seeded runs
//! and checkpoint-resume bit-reproducible.

use serde::{Deserialize, Serialize};

/// PCG-XSH-RR 64/32 generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pcg32 {
    state: u64,
    inc: u64,
}

const PCG_MULT: u64 = 6364136223846793005;

impl Pcg32 {
    /// Seed a generator on an explicit stream. Distinct streams are
    /// statistically independent even for the same seed.
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = Pcg32 {
            state: 0,
            inc: (stream << 1) | 1,
        };
        rng.next_u32();
        rng.state = rng.state.wrapping_add(seed);
        rng.next_u32();
        rng
    }

    pub fn next_u32(&mut self) -> u32 {
        let old = self.state;
        self.state = old.wrapping_mul(PCG_MULT).wrapping_add(self.inc);
        let xorshifted = (((old >> 18) ^ old) >> 27) as u32;
        let rot = (old >> 59) as u32;
        xorshifted.rotate_right(rot)
    }

    pub fn next_u64(&mut self) -> u64 {
        let hi = self.next_u32() as u64;
        let lo = self.next_u32() as u64;
        (hi << 32) | lo
    }

    /// Uniform f64 in [0, 1) with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform f64 in [low, high).
    pub fn uniform_in(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }

    /// Uniform integer in [0, n). n must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.uniform() * n as f64) as usize % n
    }

    /// Standard normal via Box-Muller. Two uniform draws per sample; no
    /// cached spare, so the stream state is position-independent.
    pub fn normal(&mut self) -> f64 {
        let u1 = loop {
            let u = self.uniform();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fill a buffer with standard normal samples.
    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.normal();
        }
    }
}

/// Splitmix64 finalizer; used to derive child seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a purpose tag. Children for
/// different tags are independent, so reseeding one stream (say, evaluation)
/// cannot perturb another (say, exploration).
pub fn derive(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

/// FNV-1a hash of a label, for seeding keyed by report labels rather than
/// evaluation order.
pub fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Common stream tags. Centralized so seed bookkeeping stays auditable.
pub mod tags {
    pub const PARAM_INIT: u64 = 1;
    pub const EXPLORE: u64 = 2;
    pub const ENV_SEED: u64 = 3;
    pub const FROZEN_ANGLES: u64 = 4;
    pub const LEARNER: u64 = 5;
    pub const ADVERSARY_EVAL: u64 = 6;
    pub const INITIAL_Q: u64 = 7;
    pub const ACTION_NOISE: u64 = 8;
    pub const EVAL_ENV: u64 = 9;
    pub const MIXIN: u64 = 10;
}
