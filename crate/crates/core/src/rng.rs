//! Reproducible random streams.
//!
//! All sampling uses ChaCha20 (`rand_chacha::ChaCha20Rng`), whose output is
//! fixed for a given seed on every platform. A run has a single master seed;
//! each independent task (time point, noise level, basis setting, replica,
//! ...) gets its own stream whose seed is derived from the master seed and a
//! list of integer labels through [`derive_seed`], so any subset of a run can
//! be replayed on its own and parallel scheduling never changes the output.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type SimRng = ChaCha20Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the sub-stream identified by `labels` under `master`.
///
/// `derive_seed(m, &[a, b]) = mix(mix(mix(m) ^ a) ^ b)` with `mix` the
/// SplitMix64 step.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(mix(master), |acc, &l| mix(acc ^ l))
}

pub fn derived_rng(master: u64, labels: &[u64]) -> SimRng {
    rng_from_seed(derive_seed(master, labels))
}
