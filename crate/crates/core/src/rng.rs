//! Counter-based random substreams.
//!
//! Every random draw in a sweep comes from a generator keyed by `(seed, domain, a, b)`, for
//! example `(seed, NOISE, snr_index, trial)`. Results therefore do not depend on the order in
//! which trials run, so serial and parallel execution agree bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator type used for all substreams.
pub type StreamRng = ChaCha8Rng;

/// Receiver placement draws.
pub const CHANNEL: u64 = 1;
/// Message and noise draws.
pub const DATA: u64 = 2;
/// Random fallback decisions of the linear detectors.
pub const FALLBACK: u64 = 3;
/// Mutual-information samples.
pub const MUTUAL_INFO: u64 = 4;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for the coordinates `(seed, domain, a, b)`.
pub fn substream(seed: u64, domain: u64, a: u64, b: u64) -> StreamRng {
    let mut state = seed;
    for word in [domain, a, b] {
        state = splitmix64(&mut state) ^ word;
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    StreamRng::from_seed(key)
}
