//! Seed derivation.
//!
//! A run is driven by one root seed. Every (page, stream) pair gets its own
//! ChaCha8 generator whose seed is
//!
//! ```text
//! sub = splitmix64(splitmix64(root) ^ splitmix64(page * 4 + stream_tag) ^ aux)
//! ```
//!
//! so streams are independent of each other and of the order in which they
//! are consumed. Experiments derive per-trial roots with [`trial_seed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Event stream of one page.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Change,
    Request,
    Refresh,
    /// Anything else a caller needs (initial cache state, jitter, ...).
    Aux(u32),
}

impl Stream {
    fn tag(self) -> (u64, u64) {
        match self {
            Stream::Change => (0, 0),
            Stream::Request => (1, 0),
            Stream::Refresh => (2, 0),
            Stream::Aux(k) => (3, u64::from(k)),
        }
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(root: u64, page: usize, stream: Stream) -> u64 {
    let (tag, aux) = stream.tag();
    let lane = (page as u64).wrapping_mul(4).wrapping_add(tag);
    splitmix64(splitmix64(root) ^ splitmix64(lane) ^ aux.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn stream_rng(root: u64, page: usize, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, page, stream))
}

/// Root seed of trial `index` in an experiment seeded with `root`.
pub fn trial_seed(root: u64, index: u64) -> u64 {
    splitmix64(root.rotate_left(17) ^ splitmix64(index.wrapping_add(0xA076_1D64_78BD_642F)))
}
