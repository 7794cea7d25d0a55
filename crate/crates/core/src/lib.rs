//! Detecting unusual inputs to dense softmax classifiers.
//!
//! The central quantity is the Fisher form `vᵀ F(x) v`: the Fisher information
//! of the predictive distribution at input `x`, contracted with the direction
//! `v = -∂θ H(x)` that sharpens the current prediction. Alongside it the crate
//! provides the usual baselines (error probability, predictive entropy,
//! Monte-Carlo dropout entropy, deep-ensemble entropy), a rank normalization
//! that maps every metric onto a common `[0, 1]` scale, and ROC/AUC tooling.
//!
//! All arithmetic is `f64`; logarithms are natural (entropies are in nats).
//!
//! Modules:
//! - [`netcore`]: dense networks, softmax, dropout, entropy gradient, model files.
//! - [`metrics`]: per-datapoint uncertainty scores.
//! - [`calib`]: rank normalization, ROC curves, histograms.
//! - [`scenarios`]: dataset loaders and perturbation generators.
//! - [`train`]: deterministic mini-batch training and ensembles.

pub mod calib;
pub mod error;
pub mod metrics;
pub mod netcore;
pub mod scenarios;
pub mod train;

pub use error::{DataError, Error, FormatError, Result};
pub use netcore::{
    Activation, DenseLayerSpec, DirectionVector, DropoutConfig, DropoutKind, Model, NetworkSpec,
    ParameterVector, ProbabilityVector,
};
