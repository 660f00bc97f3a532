//! Stable RNG stream derivation.
//!
//! Streams are keyed by a user seed plus string labels (video id, annotator
//! name, window index) so results do not depend on processing order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn derive_seed(seed: u64, labels: &[&str]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for l in labels {
        h.update((l.len() as u64).to_le_bytes());
        h.update(l.as_bytes());
    }
    h.finalize().into()
}

pub fn rng_for(seed: u64, labels: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_seed(seed, labels))
}
