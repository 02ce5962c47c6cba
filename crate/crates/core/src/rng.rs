//! Deterministic random streams.
//!
//! Every stochastic component draws from a ChaCha stream keyed by the run
//! seed plus a tuple of tags (client id, round, purpose). Results therefore
//! do not depend on the order in which parallel workers execute.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags for non-client purposes, kept well away from client ids.
pub const TAG_INIT: u64 = u64::MAX;
pub const TAG_PARTITION: u64 = u64::MAX - 1;
pub const TAG_SPLIT: u64 = u64::MAX - 2;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `seed` with `tags` into a 64-bit key.
pub fn derive_key(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream(seed: u64, tags: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_key(seed, tags))
}

/// The stream a client uses during one round of local training.
pub fn client_round_stream(seed: u64, client: usize, round: usize) -> Rng {
    stream(seed, &[client as u64, round as u64])
}
