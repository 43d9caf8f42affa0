//! Seeded random streams. Every randomized check takes an explicit seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for worker `stream` derived from a master seed.
pub fn derived(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.wrapping_add(1));
    rng
}

/// Test vector of length `n`. Alternates between a few shapes so that
/// sign changes, plateaus and sparse spikes all get exercised.
pub fn sample_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    match rng.random_range(0..4u8) {
        0 => (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        1 => (0..n)
            .map(|_| {
                let v: f64 = rng.random_range(-1.0..1.0);
                v.signum() * v.abs().powi(3)
            })
            .collect(),
        2 => {
            let level: f64 = rng.random_range(-1.0..1.0);
            (0..n)
                .map(|_| {
                    if rng.random_bool(0.5) {
                        level
                    } else {
                        rng.random_range(-1.0..1.0)
                    }
                })
                .collect()
        }
        _ => (0..n)
            .map(|_| {
                if rng.random_bool(0.2) {
                    rng.random_range(-1.0..1.0)
                } else {
                    0.0
                }
            })
            .collect(),
    }
}
