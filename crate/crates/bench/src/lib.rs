//! Inputs shared by the benchmarks.

use ihc2he_core::synthetic::{blob_layout, label_shapes};
use ihc2he_core::translation::{Models, Tensor};
use ihc2he_core::{LabelMap, TranslationConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Ground truth and a perturbed prediction over the same `size x size` blobs.
pub fn label_pair(size: usize, seed: u64) -> (LabelMap, LabelMap) {
    let blobs: Vec<_> = (0..(size / 64).pow(2).max(1) as u64)
        .flat_map(|k| {
            let (r, c) = (k as usize / (size / 64).max(1), k as usize % (size / 64).max(1));
            blob_layout(64, seed + k).into_iter().map(move |mut e| {
                e.row += (r * 64) as f64;
                e.col += (c * 64) as f64;
                e
            })
        })
        .collect();
    let gt = label_shapes(size, size, &blobs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifted: Vec<_> = blobs
        .iter()
        .map(|e| {
            let mut e = *e;
            e.row += rng.gen_range(-2.0..2.0);
            e.col += rng.gen_range(-2.0..2.0);
            e
        })
        .collect();
    (label_shapes(size, size, &shifted), gt)
}

/// Histogram with two noisy modes.
pub fn bimodal_histogram(seed: u64) -> [u64; 256] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hist = [0u64; 256];
    for _ in 0..65_536 {
        let center = if rng.gen_bool(0.3) { 70.0 } else { 200.0 };
        let v: f64 = center + rng.gen_range(-30.0..30.0);
        hist[v.clamp(0.0, 255.0) as usize] += 1;
    }
    hist
}

/// The small translator used by the toy run.
pub fn toy_models() -> (TranslationConfig, Models<f32>) {
    let config = TranslationConfig {
        patch_size: 64,
        batch_size: 1,
        generator_filters: 8,
        generator_blocks: 2,
        discriminator_filters: 8,
        discriminator_layers: 2,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let models = Models::initialize(&config, &mut rng);
    (config, models)
}

pub fn random_tensor(channels: usize, size: usize, seed: u64) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..channels * size * size).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::from_vec(channels, size, size, data)
}
