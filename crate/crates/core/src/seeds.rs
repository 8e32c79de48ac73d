//! Key derivation for reproducible random streams.
//!
//! Every random stream in a campaign is keyed by the master seed and an ordered
//! list of string parts, typically `(purpose, model id, seed index, component)`.
//! The 32-byte ChaCha key is
//!
//! ```text
//! SHA-256("driftlab-kdf-v1" || master_seed as u64 LE || for each part: len as u64 LE || utf8 bytes)
//! ```
//!
//! so adding a component to a model, or running a part of a trajectory on its
//! own, never changes the stream of any other component.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"driftlab-kdf-v1";

/// Derives a 32-byte key from the master seed and the ordered key parts.
pub fn derive_key(master_seed: u64, parts: &[&str]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(DOMAIN);
    hasher.update(master_seed.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    key
}

/// A ChaCha8 stream for the given key parts.
pub fn derive_rng(master_seed: u64, parts: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_key(master_seed, parts))
}

/// Folds a key down to a `u64`, for APIs that take integer seeds.
pub fn derive_u64(master_seed: u64, parts: &[&str]) -> u64 {
    let key = derive_key(master_seed, parts);
    u64::from_le_bytes(key[..8].try_into().expect("8 bytes"))
}
