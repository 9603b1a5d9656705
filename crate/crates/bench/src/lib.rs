//! Inputs shared by the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spine3::{GluingSpec, Triangulation};

/// A random orientable triangulation, reproducible from `seed`.
pub fn random_triangulation(seed: u64, tets: usize) -> Triangulation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Triangulation::new(GluingSpec::random_orientable(&mut rng, tets)).expect("generated specs are valid")
}
