//! Planning for retrieving a target object from planar clutter with a
//! sequence of straight pushes followed by one top-down grasp.
//!
//! The crate bundles a deterministic quasi-static push simulator, a geometric
//! grasp-feasibility oracle, plain Monte Carlo tree search over pushes, a
//! learned push-value prior distilled from search statistics, prior-guided
//! search, and a benchmark harness.

pub mod cases;
pub mod geometry;
pub mod grasp;
pub mod grid;
pub mod guided;
pub mod harness;
pub mod mcts;
pub mod par;
pub mod prior;
pub mod scene;
pub mod sim;
pub mod tree;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Mix a base seed and a stream id into an independent generator.
pub fn rng_for(seed: u64, stream: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, stream))
}

/// SplitMix64 finalizer over `seed` and `stream`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
