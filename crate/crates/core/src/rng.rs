//! Seedable, splittable random streams.
//!
//! A [`Streams`] value names a family of ChaCha20 streams. Children are
//! derived by label, and [`Streams::rng`] opens the stream for one index.
//! Every stream is a pure function of the base seed and the derivation path,
//! so results do not depend on evaluation order or thread count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

/// Labels for the top-level consumers of randomness.
pub mod label {
    pub const RELEASE_NOISE: u64 = 1;
    pub const CERTIFICATE: u64 = 2;
    pub const SUPPORT_QUERY: u64 = 3;
    pub const SYNTHETIC: u64 = 4;
    pub const DATA: u64 = 5;
    pub const LOWDIM: u64 = 6;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
    path: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams { seed, path: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derived family for `label`; distinct labels give unrelated streams.
    pub fn child(&self, label: u64) -> Streams {
        Streams {
            seed: self.seed,
            path: splitmix64(self.path ^ splitmix64(label.wrapping_add(0xA076_1D64_78BD_642F))),
        }
    }

    /// The stream with the given index inside this family.
    pub fn rng(&self, index: u64) -> StreamRng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.path.to_le_bytes());
        key[16..24].copy_from_slice(&index.to_le_bytes());
        key[24..].copy_from_slice(&0x6470_6365_7274u64.to_le_bytes());
        ChaCha20Rng::from_seed(key)
    }

    /// A plain seed for an independent sub-computation with its own base seed.
    pub fn derive_seed(&self, index: u64) -> u64 {
        self.rng(index).next_u64()
    }
}
