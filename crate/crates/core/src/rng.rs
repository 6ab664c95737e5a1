//! Keyed random substreams.
//!
//! Every stochastic draw during generation comes from a substream keyed by
//! `(seed, absolute position, purpose)`. Pure AR generation draws from the
//! `Resample` stream at every position, so a NARA run that rejects every
//! draft consumes exactly the same numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Draft,
    Resample,
}

impl Purpose {
    fn stream_id(self) -> u64 {
        match self {
            Purpose::Draft => 1,
            Purpose::Resample => 2,
        }
    }
}

// 32-bit words reserved per position inside one ChaCha stream
const WORDS_PER_POSITION: u128 = 64;

/// Deterministic generator for one `(seed, position, purpose)` key.
pub fn substream(seed: u64, position: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose.stream_id());
    rng.set_word_pos(u128::from(position) * WORDS_PER_POSITION);
    rng
}

/// The single standard-normal draw used at `position` for `purpose`.
pub fn standard_normal(seed: u64, position: u64, purpose: Purpose) -> f64 {
    substream(seed, position, purpose).sample(StandardNormal)
}

/// Generator for everything outside generation (init, shuffles, rollouts).
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with an index into a fresh 64-bit seed (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
