//! Counter-based random streams.
//!
//! Every Monte-Carlo draw gets its own ChaCha stream keyed by the master seed
//! and a stream index, so results do not depend on how trials are scheduled
//! across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Concrete generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a label.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    mix64(seed ^ mix64(label.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

/// Independent stream `stream` of master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream for trial `trial` inside experiment cell `cell`.
pub fn cell_trial_rng(seed: u64, cell: u64, trial: u64) -> StreamRng {
    stream_rng(derive_seed(seed, cell), trial)
}
