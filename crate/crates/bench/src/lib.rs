//! Shared fixtures for the pipeline benchmarks: deterministic galleries and
//! probe sets so criterion runs compare like against like across checkouts.

use emfv_core::synthetic::colinear_banded_gallery;
use emfv_core::BandedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A built index over `persons` persons with two samples each, deterministic
/// in `seed`.
pub fn sized_index(persons: usize, dimension: usize, seed: u64) -> BandedIndex {
    let built = colinear_banded_gallery(&vec![2; persons], dimension, seed)
        .expect("benchmark gallery construction");
    BandedIndex::build(&built.gallery, 0.0).expect("benchmark index build")
}

/// `count` probe distances drawn uniformly from `[0, top)`.
pub fn uniform_probes(top: f64, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random_range(0.0..top)).collect()
}
