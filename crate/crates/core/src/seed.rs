//! Stable sub-seed derivation.
//!
//! A sub-seed is the first eight bytes (little endian) of
//! `SHA-256(master_le_bytes || 0x00 || part_0 || 0x00 || part_1 ...)`, so adding
//! a corpus or a role never perturbs the draws of existing ones.

use sha2::{Digest, Sha256};

pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for part in parts {
        hasher.update([0u8]);
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
