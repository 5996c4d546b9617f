//! Seeded random source shared by sampling, data generation and k-means.
//!
//! Every seeded operation in this crate draws from ChaCha8 (`rand_chacha`)
//! initialised with [`rand::SeedableRng::seed_from_u64`]. The stream is
//! fixed by the algorithm and the seed, so results do not depend on the
//! platform or on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type KtRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> KtRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw from `(0, 1]`.
pub fn open_unit(rng: &mut KtRng) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Pair of independent standard normals by Box–Muller.
///
/// Consumes two uniforms `u1 ∈ (0, 1]`, `u2 ∈ [0, 1)` in that order and
/// returns `(r cos 2πu2, r sin 2πu2)` with `r = sqrt(-2 ln u1)`.
pub fn normal_pair(rng: &mut KtRng) -> (f64, f64) {
    let u1 = open_unit(rng);
    let u2: f64 = rng.random();
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = std::f64::consts::TAU * u2;
    (r * theta.cos(), r * theta.sin())
}
