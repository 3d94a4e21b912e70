//! Deterministic randomness.
//!
//! Every random draw in the crate comes from a ChaCha20 stream
//! (`rand_chacha::ChaCha20Rng`, seeded through `SeedableRng::seed_from_u64`).
//! Sub-streams are keyed by `(root seed, stream tag, index)` and mixed with
//! SplitMix64, so iteration `i` of a corpus or layer `l` of a sweep gets the
//! same generator whether the work runs serially or in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// The generator used throughout. Its output stream is value-stable across
/// `rand_chacha` patch releases.
pub type DetRng = ChaCha20Rng;

/// Version tag for the seed derivation below. Bump if it ever changes.
pub const RNG_SCHEME: &str = "chacha20+splitmix64/v1";

/// Stream tags. Each consumer of randomness owns one.
pub mod stream {
    pub const KV_ITERATION: u64 = 1;
    pub const MDQA_ITERATION: u64 = 2;
    pub const CORPUS_SPLIT: u64 = 3;
    pub const PROBE_LAYER: u64 = 4;
    pub const SYNTH_ROTATION: u64 = 5;
    pub const SYNTH_PROMPT: u64 = 6;
    pub const ARCHIVE_SPLIT: u64 = 7;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed of sub-stream `(stream, index)` under `root`.
pub fn sub_seed(root: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(root ^ splitmix64(stream)) ^ index)
}

pub fn rng_from_seed(seed: u64) -> DetRng {
    DetRng::seed_from_u64(seed)
}

pub fn sub_rng(root: u64, stream: u64, index: u64) -> DetRng {
    rng_from_seed(sub_seed(root, stream, index))
}
