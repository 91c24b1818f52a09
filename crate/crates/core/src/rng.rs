//! Counter-derived random streams.
//!
//! Every consumer of randomness asks for a stream identified by
//! `(master seed, domain, index)`. Streams are ChaCha8 generators keyed by the
//! master seed and selected by a stream id mixed from the domain and index, so
//! results never depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tag for per-block generator sampling.
pub const DOMAIN_GENERATORS: u64 = 0x6765_6e73;
/// Domain tag for Monte Carlo walk trials.
pub const DOMAIN_WALK: u64 = 0x7761_6c6b;
/// Domain tag for Alon-Roichman verification trials.
pub const DOMAIN_ALON_ROICHMAN: u64 = 0x616c_726f;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The independent stream for `(master, domain, index)`.
pub fn derive(master: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut key_state = master;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut key_state).to_le_bytes());
    }
    let mut stream_state = domain.rotate_left(32) ^ index;
    let stream = splitmix64(&mut stream_state);
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}
