//! Named random sub-streams derived from one master seed.
//!
//! Every purpose (arrivals, backoff, beacon phases, measurement noise, ...)
//! draws from its own ChaCha stream, so enabling one randomness source never
//! shifts the values another one sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over the purpose label, folded into the master seed.
pub fn derive_seed(master: u64, purpose: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in purpose.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    mix64(mix64(master ^ h).wrapping_add(mix64(index)))
}

pub fn substream(master: u64, purpose: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, purpose, index))
}

/// Deterministic standard normal sample keyed by an arbitrary hash.
///
/// Uses Box-Muller on two uniforms taken from the hashed key.
pub fn hashed_standard_normal(key: u64) -> f64 {
    let a = mix64(key);
    let b = mix64(a ^ 0x5851_f42d_4c95_7f2d);
    // 53-bit uniforms in (0, 1].
    let u1 = ((a >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
    let u2 = (b >> 11) as f64 / (1u64 << 53) as f64;
    crate::math::sqrt(-2.0 * libm::log(u1)) * crate::math::cos(2.0 * core::f64::consts::PI * u2)
}
