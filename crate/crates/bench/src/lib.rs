//! Fixtures shared by the criterion benchmarks under `benches/`.

use placegan::features::FeatureVector;
use placegan::{Real, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform values in `[-1, 1)` from a fixed seed.
pub fn random_tensor<T: Real>(shape: &[usize], seed: u64) -> Tensor<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| T::lit(rng.gen_range(-1.0..1.0)))
}

/// `count` consecutive frames of `dim`-wide random features.
pub fn random_features(count: usize, dim: usize, seed: u64) -> Vec<FeatureVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| FeatureVector {
            values: (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            source_frame: i,
            domain: "A".into(),
        })
        .collect()
}
