//! Deterministic random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream addressed by
//! `(seed, domain, a, b)`: the key is derived from `seed` and `domain`, and the
//! 64-bit stream id is `a << 32 | b`. A walk uses `(start, replicate)`, a cascade
//! uses `(simulation, 0)`. Results therefore do not depend on which thread runs
//! which unit of work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Walk = 0x5741_4c4b,
    Cascade = 0x4341_5343,
    WeightedCascade = 0x5743_4153,
    Synth = 0x5359_4e54,
    Misc = 0x4d49_5343,
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn key(seed: u64, domain: Domain) -> [u8; 32] {
    let mut out = [0u8; 32];
    let mut state = seed ^ (domain as u64).rotate_left(17);
    for chunk in out.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    out
}

pub fn stream(seed: u64, domain: Domain, a: u32, b: u32) -> StreamRng {
    let mut rng = ChaCha8Rng::from_seed(key(seed, domain));
    rng.set_stream(((a as u64) << 32) | b as u64);
    rng
}

/// Stateless uniform in `[0, 1)` keyed by four words. Used where a coin must be
/// a fixed function of its coordinates (coupled cascades).
#[inline]
pub fn hashed_unit(seed: u64, a: u64, b: u64, c: u64) -> f64 {
    let mut h = splitmix64(seed ^ 0x6a09_e667_f3bc_c908);
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b.rotate_left(21));
    h = splitmix64(h ^ c.rotate_left(42));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
