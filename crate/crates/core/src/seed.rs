//! Deterministic seed derivation and the toolkit's random number generator.
//!
//! All sampling goes through [`Rng64`] (ChaCha8 with a seed expanded by
//! splitmix64), so a 64-bit seed fully determines every output byte across
//! runs and worker counts. Batch items are seeded through [`split_seed`],
//! never by sharing one generator across items.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every stochastic operation in this crate.
pub type Rng64 = ChaCha8Rng;

fn splitmix_next(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed for item `index` of a batch keyed by `base`.
///
/// The rule is fixed: one splitmix64 step over `base`, xored with the
/// index scaled by the splitmix increment, then a second splitmix step.
/// Changing it would silently re-key every reproducible batch.
pub fn split_seed(base: u64, index: u64) -> u64 {
    let mut state = base;
    let mixed_base = splitmix_next(&mut state);
    let mut state = mixed_base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    splitmix_next(&mut state)
}

/// Build the generator for a 64-bit seed.
///
/// The 256-bit ChaCha key is filled by four splitmix64 outputs so the
/// stream depends only on this crate's expansion and the ChaCha8 stream
/// definition, not on any library seeding helper.
pub fn rng_from_seed(seed: u64) -> Rng64 {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix_next(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
