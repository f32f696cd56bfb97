//! Seed derivation.
//!
//! Every random decision in a run flows from one user seed. Components ask
//! for a named sub-stream (`"split"`, `"walks"`, `"init"`, ...) so adding a
//! consumer never shifts the numbers another consumer sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed of the sub-stream `name` under `seed`.
pub fn substream(seed: u64, name: &str) -> u64 {
    splitmix64(seed ^ splitmix64(fnv1a(name.as_bytes())))
}

/// Mixes an ordered list of integers into a seed, e.g. `(seed, u, v)`.
pub fn mix(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x2545_F491_4F6C_DD1D, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn named(seed: u64, name: &str) -> Rng {
    rng_from(substream(seed, name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn named_streams_are_stable_and_distinct() {
        let a: u64 = named(2, "split").random();
        let b: u64 = named(2, "split").random();
        let c: u64 = named(2, "walks").random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn mix_is_order_sensitive() {
        assert_ne!(mix(&[1, 2, 3]), mix(&[1, 3, 2]));
        assert_eq!(mix(&[7, 8]), mix(&[7, 8]));
    }
}
