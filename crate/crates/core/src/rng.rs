//! Independent, seeded random streams.
//!
//! Each consumer (node traffic, node placement, shadowing) draws from its own
//! ChaCha stream so that adding a network or a base station never perturbs the
//! draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamTag {
    Traffic = 1,
    Placement = 2,
    Shadowing = 3,
}

/// Stream for `(tag, index)` under `seed`; `index` must fit in 56 bits.
pub fn stream(seed: u64, tag: StreamTag, index: u64) -> ChaCha8Rng {
    debug_assert!(index < 1 << 56);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((tag as u64) << 56) | index);
    rng
}

/// Packs a (network, node) pair into a stream index.
pub fn node_index(network: usize, node: usize) -> u64 {
    ((network as u64) << 32) | node as u64
}
