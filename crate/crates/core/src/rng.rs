//! Seeded randomness. Every random draw in the crate goes through an
//! explicitly passed [`SeededRng`]; there is no ambient generator.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub type SeededRng = ChaCha20Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Independent stream for a named actor, derived as SHA-256(seed || label).
pub fn substream(seed: u64, label: &str) -> SeededRng {
    let mut h = Sha256::new();
    h.update(seed.to_be_bytes());
    h.update(label.as_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}
