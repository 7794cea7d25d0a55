use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::error::{Error, Result};

/// Gaussian clusters around seeded centers drawn uniformly from `[-4, 4]^dim`.
/// Rows cycle through the classes (`0, 1, …, C−1, 0, 1, …`).
pub fn synth_blobs(
    classes: usize,
    per_class: usize,
    dim: usize,
    centers_seed: u64,
    spread: f64,
) -> Result<Dataset> {
    if classes < 2 || per_class < 1 || dim < 1 {
        return Err(Error::Argument(format!(
            "blobs need at least 2 classes, 1 point per class and 1 dimension (got {classes}, {per_class}, {dim})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(centers_seed);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..dim).map(|_| rng.random_range(-4.0..=4.0)).collect())
        .collect();
    blobs_with_centers(&centers, per_class, centers_seed, spread)
}

/// Gaussian clusters around explicit centers, `spread` being the per-axis
/// standard deviation. Points use stream 1 of `seed`.
pub fn blobs_with_centers(
    centers: &[Vec<f64>],
    per_class: usize,
    seed: u64,
    spread: f64,
) -> Result<Dataset> {
    if !(spread.is_finite() && spread >= 0.0) {
        return Err(Error::Argument(format!(
            "spread must be finite and non-negative, got {spread}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut inputs = Vec::with_capacity(centers.len() * per_class);
    let mut labels = Vec::with_capacity(centers.len() * per_class);
    for _ in 0..per_class {
        for (label, center) in centers.iter().enumerate() {
            inputs.push(
                center
                    .iter()
                    .map(|&c| {
                        let z: f64 = rng.sample(StandardNormal);
                        c + spread * z
                    })
                    .collect(),
            );
            labels.push(label);
        }
    }
    Dataset::new(inputs, labels, centers.len())
}
