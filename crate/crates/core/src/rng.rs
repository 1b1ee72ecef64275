//! Seeded, splittable randomness.
//!
//! Every consumer derives its own child handle from `(seed, tag, index)`, so
//! adding or reordering draws in one place never shifts the stream seen by
//! another. Streams are ChaCha8, a counter-based generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngHandle {
    seed: u64,
}

impl RngHandle {
    pub const ALGORITHM: &'static str = "chacha8/splitmix64-derive";

    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child handle for a named purpose and index.
    pub fn derive(&self, tag: &str, index: u64) -> RngHandle {
        let mut h = splitmix64(self.seed ^ 0x5352_4144_5f52_4e47);
        h = splitmix64(h ^ fnv1a(tag.as_bytes()));
        h = splitmix64(h ^ index);
        RngHandle { seed: h }
    }

    /// Fresh generator positioned at the start of this handle's stream.
    pub fn stream(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut s = self.seed;
        for chunk in key.chunks_exact_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
