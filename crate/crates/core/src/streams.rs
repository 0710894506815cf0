//! Deterministic random-number streams.
//!
//! Every randomised computation takes its generator from here so that
//! results depend only on the configured seed and the logical position of
//! the draw (trial index, sub-test index, replicate index), never on
//! thread scheduling or worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finaliser; a compact bijective mixer used to derive
/// well-separated child seeds from a base seed and an index.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for the `tag`-th unit of work under `base`. Mixing the tag
/// before the xor keeps seeds for consecutive tags unrelated.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    splitmix64(base ^ splitmix64(tag))
}

/// Generator for one permutation replicate of one sub-test. The stream
/// index separates draws, so replicates can run in any order or in
/// parallel without changing what each one sees.
pub fn replicate_rng(seed: u64, subtest: u32, replicate: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((subtest as u64) << 32) | replicate as u64);
    rng
}

/// Generator for seed-level work outside the permutation loop (data
/// generation, shuffles).
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
