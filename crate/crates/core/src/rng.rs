//! Deterministic randomness: one master seed per run, forked into
//! independent streams by fixed string labels so each pipeline stage
//! (data, init, pairs, noise, kmeans) draws from its own generator.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// FNV-1a 64-bit hash; stable across platforms and versions.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Root of all randomness for one run.
#[derive(Debug, Clone, Copy)]
pub struct RunRng {
    seed: u64,
}

impl RunRng {
    pub fn new(seed: u64) -> Self {
        RunRng { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for a named component. Same (seed, label) pair
    /// always yields the same stream.
    pub fn fork(&self, label: &str) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(splitmix64(self.seed ^ fnv1a64(label.as_bytes())))
    }
}
