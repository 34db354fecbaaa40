//! Counter-based random streams.
//!
//! A stream is identified by `(master seed, purpose label, index)`. The
//! identity is hashed into a ChaCha20 key, so the draws for sample `i` do not
//! depend on how many other samples were drawn before it or on which worker
//! drew them.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha20Rng;

pub fn stream(master_seed: u64, purpose: &str, index: u64) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update((purpose.len() as u64).to_le_bytes());
    hasher.update(purpose.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest[..32]);
    ChaCha20Rng::from_seed(key)
}

/// `n` i.i.d. standard normal draws.
pub fn gaussian_vector<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}
