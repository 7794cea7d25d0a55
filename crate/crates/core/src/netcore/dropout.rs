use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DropoutKind {
    /// Units are zeroed with probability `rate`; survivors are scaled by `1/(1-rate)`.
    Bernoulli,
    /// Units are multiplied by `N(1, α)` with `α = rate/(1-rate)`.
    Gaussian,
}

/// Dropout on hidden-layer outputs.
///
/// Masks come from ChaCha8 seeded with `seed`; pass `k` reads stream `k`, so
/// `(seed, pass_index)` fixes every mask independently of platform and of the
/// order in which passes are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutConfig {
    kind: DropoutKind,
    rate: f64,
    seed: u64,
}

impl DropoutConfig {
    pub fn new(kind: DropoutKind, rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Argument(format!(
                "dropout rate must lie in [0, 1), got {rate}"
            )));
        }
        Ok(Self { kind, rate, seed })
    }

    pub fn bernoulli(rate: f64, seed: u64) -> Result<Self> {
        Self::new(DropoutKind::Bernoulli, rate, seed)
    }

    pub fn gaussian(rate: f64, seed: u64) -> Result<Self> {
        Self::new(DropoutKind::Gaussian, rate, seed)
    }

    pub fn kind(&self) -> DropoutKind {
        self.kind
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    /// Variance of the multiplicative Gaussian noise.
    pub fn gaussian_variance(&self) -> f64 {
        self.rate / (1.0 - self.rate)
    }

    pub(crate) fn pass_rng(&self, pass_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(pass_index);
        rng
    }

    /// Draws one multiplicative mask of `width` entries.
    pub(crate) fn sample_mask<R: Rng + ?Sized>(&self, rng: &mut R, width: usize) -> Vec<f64> {
        if self.rate == 0.0 {
            return vec![1.0; width];
        }
        match self.kind {
            DropoutKind::Bernoulli => {
                let keep_scale = 1.0 / (1.0 - self.rate);
                (0..width)
                    .map(|_| {
                        if rng.random::<f64>() < self.rate {
                            0.0
                        } else {
                            keep_scale
                        }
                    })
                    .collect()
            }
            DropoutKind::Gaussian => {
                let std = self.gaussian_variance().sqrt();
                (0..width)
                    .map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        1.0 + std * z
                    })
                    .collect()
            }
        }
    }
}

impl fmt::Display for DropoutConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            DropoutKind::Bernoulli => "bernoulli",
            DropoutKind::Gaussian => "gaussian",
        };
        write!(f, "{kind}:{}", self.rate)
    }
}

impl FromStr for DropoutConfig {
    type Err = Error;

    /// Parses `bernoulli:0.5` or `gaussian:0.5`; the seed defaults to 0.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rate) = s
            .split_once(':')
            .ok_or_else(|| Error::Argument(format!("expected kind:rate, got {s:?}")))?;
        let kind = match kind.trim() {
            "bernoulli" => DropoutKind::Bernoulli,
            "gaussian" => DropoutKind::Gaussian,
            other => return Err(Error::Argument(format!("unknown dropout kind {other:?}"))),
        };
        let rate: f64 = rate
            .trim()
            .parse()
            .map_err(|_| Error::Argument(format!("bad dropout rate in {s:?}")))?;
        Self::new(kind, rate, 0)
    }
}
