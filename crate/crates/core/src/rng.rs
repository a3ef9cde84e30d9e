//! Deterministic random-stream splitting.
//!
//! Every stochastic stage receives an [`RngStream`] derived from the single
//! run seed. A child stream is keyed by a label and an index and its seed is
//! `mix(parent_seed ^ mix(fnv1a(label) ^ mix(index)))`, where `mix` is the
//! SplitMix64 finalizer. Children never depend on the order in which they are
//! created, so parallel stages reproduce single-threaded results bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator handed to sequential sampling routines.
pub type StreamRng = ChaCha8Rng;

/// A node in the seed tree of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives the child stream `(label, index)`.
    pub fn child(&self, label: &str, index: u64) -> Self {
        let key = splitmix64(fnv1a(label) ^ splitmix64(index));
        Self {
            seed: splitmix64(self.seed ^ key),
        }
    }

    /// Instantiates the generator for this node.
    pub fn rng(&self) -> StreamRng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}
