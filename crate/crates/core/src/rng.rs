//! Deterministic RNG substreams keyed by a global seed and a label path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn keyed_rng(seed: u64, key: &[&str]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for part in key {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    ChaCha8Rng::from_seed(h.finalize().into())
}
