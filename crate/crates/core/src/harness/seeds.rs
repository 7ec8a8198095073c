//! Counter-based seed derivation: every component draws its randomness
//! from (root seed, stream label, index), so paired ablation arms share
//! world and noise draws exactly.

use sha2::{Digest, Sha256};

pub fn derive_seed(root: u64, stream: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(stream.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
