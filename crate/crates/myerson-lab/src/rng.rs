//! Seed derivation for reproducible experiments.
//!
//! Every experiment owns a master seed; each trial gets its own ChaCha8
//! stream derived from (master seed, experiment tag, trial index). Trials are
//! therefore independent of execution order and thread count, and any single
//! trial can be replayed in isolation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche, stable across platforms.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// RNG for a whole experiment (tag distinguishes experiments sharing a seed).
pub fn master_rng(seed: u64, tag: &str) -> ChaCha8Rng {
    trial_rng(seed, tag, 0)
}

/// RNG for one trial of one experiment. Streams for distinct
/// (seed, tag, trial) triples are derived through a 256-bit expansion of the
/// mixed key, so they never overlap in practice.
pub fn trial_rng(seed: u64, tag: &str, trial: u64) -> ChaCha8Rng {
    let key = mix(seed ^ fnv1a(tag).rotate_left(17) ^ mix(trial.wrapping_mul(0x9e37_79b9)));
    let mut bytes = [0u8; 32];
    let mut state = key;
    for chunk in bytes.chunks_exact_mut(8) {
        state = mix(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}
