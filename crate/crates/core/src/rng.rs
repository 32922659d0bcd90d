//! Seeded PRNG streams for reproducible runs.
//!
//! Every randomized routine takes an explicit generator. Batch runs split one
//! root seed into independent child streams, one per trajectory index, so
//! results do not depend on scheduling order or worker-thread count.
//! Gaussian variates come from `rand_distr::StandardNormal` (Ziggurat), which
//! is deterministic given the stream on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Prng = ChaCha8Rng;

/// Root generator for a run.
pub fn seeded(seed: u64) -> Prng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent child stream for trajectory (or trial) `index` under `seed`.
///
/// Uses ChaCha's stream parameter, so children never overlap and can be
/// created in any order.
pub fn child(seed: u64, index: u64) -> Prng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

/// Standard normal vector of length `n`.
pub fn normal_vec(rng: &mut Prng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Uniform unit vector in dimension `n`.
pub fn unit_vec(rng: &mut Prng, n: usize) -> Vec<f64> {
    loop {
        let v = normal_vec(rng, n);
        let norm = crate::vecmath::norm(&v);
        if norm > 1e-300 {
            return crate::vecmath::scale(&v, 1.0 / norm);
        }
    }
}
