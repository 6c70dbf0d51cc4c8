//! Seed derivation helpers. Every random draw in the crate comes from a
//! ChaCha8 stream whose seed is mixed from stable inputs, so results never
//! depend on call order across threads.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer.
pub fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive combination of two seeds.
pub fn mix(a: u64, b: u64) -> u64 {
    splitmix(splitmix(a) ^ b.wrapping_mul(GOLDEN).rotate_left(17))
}

pub fn mix_all(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5EED, |acc, &p| mix(acc, p))
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01B3);
    }
    h
}

pub fn hash_str(s: &str) -> u64 {
    fnv1a(s.as_bytes())
}

/// Cheap content key for prompts that can be hundreds of kilobytes long:
/// hashes the first and last 256 bytes together with the length.
pub fn prompt_key(prompt: &str) -> u64 {
    let b = prompt.as_bytes();
    let head = &b[..b.len().min(256)];
    let tail = &b[b.len().saturating_sub(256)..];
    mix_all(&[fnv1a(head), fnv1a(tail), b.len() as u64])
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
