//! Deterministic random number generation.
//!
//! Every seeded computation in this crate draws from ChaCha8 seeded through
//! [`chacha`]. Sub-streams (per layer, per slot, per projection) derive their
//! seed with [`mix`], a SHA-256 based seed mixer, so distinct tags never
//! collide by accident. Determinism is guaranteed across runs on one
//! platform.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

/// The one RNG used everywhere a seed appears.
pub fn chacha(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive a sub-seed from a base seed and a domain tag.
pub fn mix(seed: u64, tag: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(tag.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Derive a sub-seed from a base seed and an index.
pub fn mix_index(seed: u64, tag: &str, index: usize) -> u64 {
    mix(seed, &format!("{tag}:{index}"))
}

/// Row-major `rows x cols` matrix of standard normal draws.
pub fn gaussian_matrix(seed: u64, rows: usize, cols: usize) -> Vec<f64> {
    let mut rng = chacha(seed);
    (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect()
}

/// A vector of standard normal draws.
pub fn gaussian_vector(seed: u64, len: usize) -> Vec<f64> {
    gaussian_matrix(seed, 1, len)
}

/// A vector of uniform draws in `[0, 1)`.
pub fn uniform_vector(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = chacha(seed);
    (0..len).map(|_| rng.gen::<f64>()).collect()
}

/// Apply a seeded Gaussian projection `y = M x` without materializing `M`
/// callers that need the matrix use [`gaussian_matrix`] directly.
pub fn project(seed: u64, input: &[f64], out_dim: usize) -> Vec<f64> {
    let m = gaussian_matrix(seed, out_dim, input.len());
    (0..out_dim)
        .map(|r| {
            input
                .iter()
                .enumerate()
                .map(|(c, x)| m[r * input.len() + c] * x)
                .sum()
        })
        .collect()
}
