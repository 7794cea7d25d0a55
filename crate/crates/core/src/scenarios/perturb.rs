use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Whether noisy inputs are clipped back to the pixel range `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseDomain {
    #[default]
    Image,
    Tabular,
}

/// `x + λ·ε` with `ε` standard normal drawn from `seed`.
pub fn noise_path(x: &[f64], lambda: f64, seed: u64, domain: NoiseDomain) -> Result<Vec<f64>> {
    noise_path_indexed(x, lambda, seed, 0, domain)
}

/// As [`noise_path`], with an independent noise draw per `index` (one per
/// dataset row). For a fixed `(seed, index)` the same `ε` is used for every
/// `λ`, so a sweep moves each input along one straight path.
pub fn noise_path_indexed(
    x: &[f64],
    lambda: f64,
    seed: u64,
    index: u64,
    domain: NoiseDomain,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Argument(format!(
            "noise level {lambda} outside [0, 1]"
        )));
    }
    if lambda == 0.0 {
        return Ok(x.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    Ok(x.iter()
        .map(|&v| {
            let eps: f64 = rng.sample(StandardNormal);
            let y = v + lambda * eps;
            match domain {
                NoiseDomain::Image => y.clamp(0.0, 1.0),
                NoiseDomain::Tabular => y,
            }
        })
        .collect())
}

/// Replaces one channel of an HWC-interleaved image by `1 − value`.
pub fn invert_channel(
    x: &[f64],
    layout: (usize, usize, usize),
    channel: usize,
) -> Result<Vec<f64>> {
    let (h, w, c) = layout;
    if h.checked_mul(w).and_then(|n| n.checked_mul(c)) != Some(x.len()) {
        return Err(Error::Shape(format!(
            "layout {h}×{w}×{c} does not match an input of length {}",
            x.len()
        )));
    }
    if channel >= c {
        return Err(Error::Shape(format!(
            "channel {channel} out of range for {c} channels"
        )));
    }
    let mut out = x.to_vec();
    for v in out.iter_mut().skip(channel).step_by(c) {
        *v = 1.0 - *v;
    }
    Ok(out)
}
