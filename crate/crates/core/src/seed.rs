//! Seed streams keyed by identifiers.
//!
//! Every randomized computation draws from a stream derived from the master
//! seed and a list of identifying labels (experiment, author, repeat...), never
//! from a shared generator. Results therefore do not depend on the order in
//! which parallel work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Derive a 64-bit seed from a master seed and a sequence of labels.
pub fn derive(master: u64, labels: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for label in labels {
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("sha256 output is 32 bytes"))
}

/// A generator for the stream identified by `labels` under `master`.
pub fn stream(master: u64, labels: &[&str]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive(master, labels))
}

/// 64-bit digest of arbitrary bytes (first eight bytes of SHA-256).
pub fn digest64(bytes: &[u8]) -> u64 {
    let out = Sha256::digest(bytes);
    u64::from_le_bytes(out[..8].try_into().expect("sha256 output is 32 bytes"))
}
