//! Labelled deterministic random streams.
//!
//! Every randomized operation takes an explicit stream derived from the run
//! seed and a label, so a run can be replayed from its seed alone.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha20Rng;

/// Derive the stream for `(seed, label)`. Equal inputs give equal streams;
/// changing either the seed or the label gives an unrelated stream.
pub fn derive_rng(seed: u64, label: &str) -> Stream {
    let mut hasher = Sha256::new();
    hasher.update(b"cpt-stream-v1");
    hasher.update(seed.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha20Rng::from_seed(key)
}

/// Derive a child seed, e.g. one per (problem, run) pair of a batch.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    use rand::RngCore;
    derive_rng(seed, label).next_u64()
}
