//! Named random sub-streams derived from one 64-bit seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SadRng = ChaCha8Rng;

pub const STREAM_INIT: &str = "init";
pub const STREAM_NEGATIVES: &str = "negative-sampling";
pub const STREAM_SPLIT: &str = "split";
pub const STREAM_GIBBS: &str = "gibbs";
pub const STREAM_TRUTH: &str = "truth";
pub const STREAM_MASK: &str = "mask";
pub const STREAM_SHUFFLE: &str = "shuffle";

// FNV-1a; stable across platforms and compiler versions.
fn stream_id(name: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in name.bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Generator for the sub-stream `name` of `seed`.
pub fn stream(seed: u64, name: &str) -> SadRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(name));
    rng
}

/// Generator for the `index`-th child of sub-stream `name`.
pub fn indexed_stream(seed: u64, name: &str, index: u64) -> SadRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(stream_id(name));
    rng
}
