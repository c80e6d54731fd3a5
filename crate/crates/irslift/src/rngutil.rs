//! Deterministic RNG stream derivation.
//!
//! Experiment trials draw from independent ChaCha streams whose seeds are
//! derived by hashing the master seed together with the grid coordinates and
//! a purpose label, so distinct (axes, trial, purpose) tuples never share a
//! stream and results are reproducible bit-for-bit.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// RNG type used across the crate.
pub type Rng = ChaCha12Rng;

/// A new RNG from a bare 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Derive an independent stream from a master seed and a label.
///
/// The label should encode every axis that distinguishes the stream
/// (grid point, trial index, purpose).
pub fn derive_stream(master: u64, label: &str) -> Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"irslift-stream");
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(seed)
}

/// Standard complex normal CN(0, variance) sample.
pub fn complex_normal(rng: &mut Rng, variance: f64) -> num_complex::Complex<f64> {
    use rand::Rng as _;
    let s = (variance / 2.0).sqrt();
    // Box-Muller keeps us independent of distribution-crate version details.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = 2.0 * std::f64::consts::PI * u2;
    num_complex::Complex::new(s * radius * angle.cos(), s * radius * angle.sin())
}
