//! Stable 64-bit hashing helpers.
//!
//! All fingerprints here are platform independent: they depend only on the
//! UTF-8 bytes of the tokens and on explicit seeds.

use xxhash_rust::xxh3::{xxh3_64_with_seed, Xxh3};

/// Separator byte fed between tokens. Word tokens never contain ASCII
/// whitespace, so joining with a space is unambiguous.
const TOKEN_SEPARATOR: &[u8] = b" ";

/// Fingerprint of a contiguous token window.
pub fn window_fingerprint<S: AsRef<str>>(tokens: &[S]) -> u64 {
    window_fingerprint_seeded(tokens, 0)
}

pub fn window_fingerprint_seeded<S: AsRef<str>>(tokens: &[S], seed: u64) -> u64 {
    let mut hasher = Xxh3::with_seed(seed);
    for (i, tok) in tokens.iter().enumerate() {
        if i > 0 {
            hasher.update(TOKEN_SEPARATOR);
        }
        hasher.update(tok.as_ref().as_bytes());
    }
    hasher.digest()
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a child seed from a master seed and a name.
///
/// Used for all named seed derivation (`"dedup"`, `"sampler/<source>/<epoch>"`, ...)
/// so that a single master seed reproduces a whole run.
pub fn derive_seed(master: u64, name: &str) -> u64 {
    splitmix64(xxh3_64_with_seed(name.as_bytes(), master))
}

/// `count` seeds derived from `master` via a counter.
pub fn counter_seeds(master: u64, count: usize) -> Vec<u64> {
    (0..count as u64)
        .map(|i| splitmix64(master ^ splitmix64(i.wrapping_add(1))))
        .collect()
}
