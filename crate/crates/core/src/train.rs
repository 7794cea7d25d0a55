//! Deterministic mini-batch training of dense softmax classifiers.
//!
//! Every random draw comes from ChaCha8 seeded with the run seed: stream 0
//! shuffles, stream 1 initializes, stream 2 samples training dropout masks.
//! Samples and batches are processed serially, so identical inputs give
//! bit-identical parameters.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::netcore::{backprop_into, forward, forward_trace, PROB_CLAMP};
use crate::scenarios::Dataset;
use crate::{DropoutConfig, NetworkSpec, ParameterVector};

const SHUFFLE_STREAM: u64 = 0;
const INIT_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

pub const MOMENTUM: f64 = 0.9;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Optimizer {
    Sgd,
    /// Heavy-ball momentum 0.9.
    SgdMomentum,
    /// β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    #[default]
    Adam,
}

impl Optimizer {
    pub fn as_str(self) -> &'static str {
        match self {
            Optimizer::Sgd => "sgd",
            Optimizer::SgdMomentum => "sgd_momentum",
            Optimizer::Adam => "adam",
        }
    }
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "sgd_momentum" | "momentum" => Ok(Optimizer::SgdMomentum),
            "adam" => Ok(Optimizer::Adam),
            other => Err(Error::Argument(format!(
                "unknown optimizer {other:?} (expected sgd, sgd_momentum or adam)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Dropout on hidden outputs during training. Masks come from the run
    /// seed, not from the config's own seed.
    pub dropout: Option<DropoutConfig>,
    /// Oversample smaller classes each epoch up to the size of the largest.
    pub balance_classes: bool,
    pub snapshot_every_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            seed: 0,
            dropout: None,
            balance_classes: false,
            snapshot_every_epoch: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Argument("batch size must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Argument(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleConfig {
    pub member_count: usize,
    pub base_seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            member_count: 5,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ParameterVector,
    /// Parameters after epoch 1, 2, …; empty unless snapshots were requested.
    pub snapshots: Vec<ParameterVector>,
    /// Mean cross-entropy over the training data after each epoch (no dropout).
    pub epoch_losses: Vec<f64>,
}

/// Weights uniform in `±√(6/(in+out))`, biases zero, drawn in parameter order.
pub fn initialize(spec: &NetworkSpec, seed: u64) -> ParameterVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    let mut values = Vec::with_capacity(spec.param_count());
    for layer in spec.layers() {
        let limit = (6.0 / (layer.in_width + layer.out_width) as f64).sqrt();
        values.extend(
            (0..layer.in_width * layer.out_width).map(|_| rng.random_range(-limit..=limit)),
        );
        values.extend(std::iter::repeat_n(0.0, layer.out_width));
    }
    ParameterVector(values)
}

fn check_compatible(spec: &NetworkSpec, data: &Dataset) -> Result<()> {
    if data.class_count() != spec.class_count() {
        return Err(Error::Shape(format!(
            "dataset has {} classes, network has {}",
            data.class_count(),
            spec.class_count()
        )));
    }
    if !data.is_empty() && data.width() != spec.input_width() {
        return Err(Error::Shape(format!(
            "dataset has {} features, network expects {}",
            data.width(),
            spec.input_width()
        )));
    }
    Ok(())
}

/// Mean `-ln max(p_y, 1e-12)` over the dataset, deterministic forward pass.
pub fn mean_cross_entropy(
    spec: &NetworkSpec,
    params: &ParameterVector,
    data: &Dataset,
) -> Result<f64> {
    check_compatible(spec, data)?;
    if data.is_empty() {
        return Err(Error::Argument("cross-entropy of an empty dataset".into()));
    }
    let mut total = 0.0;
    for (x, y) in data.iter() {
        total -= forward(spec, params, x)?.as_slice()[y].max(PROB_CLAMP).ln();
    }
    Ok(total / data.len() as f64)
}

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
pub fn evaluate_accuracy(
    spec: &NetworkSpec,
    params: &ParameterVector,
    data: &Dataset,
) -> Result<f64> {
    check_compatible(spec, data)?;
    if data.is_empty() {
        return Err(Error::Argument("accuracy of an empty dataset".into()));
    }
    let mut correct = 0usize;
    for (x, y) in data.iter() {
        if forward(spec, params, x)?.argmax() == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

fn epoch_order(data: &Dataset, balance: bool, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    if balance {
        let mut by_class = vec![Vec::new(); data.class_count()];
        for (i, &y) in data.labels().iter().enumerate() {
            by_class[y].push(i);
        }
        let target = by_class.iter().map(Vec::len).max().unwrap_or(0);
        for members in by_class.iter().filter(|m| !m.is_empty()) {
            for _ in members.len()..target {
                order.push(members[rng.random_range(0..members.len())]);
            }
        }
    }
    order.shuffle(rng);
    order
}

struct OptimizerState {
    kind: Optimizer,
    first: Vec<f64>,
    second: Vec<f64>,
    step: i32,
}

impl OptimizerState {
    fn new(kind: Optimizer, len: usize) -> Self {
        let second = if kind == Optimizer::Adam {
            vec![0.0; len]
        } else {
            Vec::new()
        };
        let first = if kind == Optimizer::Sgd {
            Vec::new()
        } else {
            vec![0.0; len]
        };
        Self {
            kind,
            first,
            second,
            step: 0,
        }
    }

    fn apply(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        self.step += 1;
        match self.kind {
            Optimizer::Sgd => {
                for (t, g) in theta.iter_mut().zip(grad) {
                    *t -= lr * g;
                }
            }
            Optimizer::SgdMomentum => {
                for ((t, u), g) in theta.iter_mut().zip(&mut self.first).zip(grad) {
                    *u = MOMENTUM * *u + g;
                    *t -= lr * *u;
                }
            }
            Optimizer::Adam => {
                let c1 = 1.0 - ADAM_BETA1.powi(self.step);
                let c2 = 1.0 - ADAM_BETA2.powi(self.step);
                for (((t, m), v), &g) in theta
                    .iter_mut()
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                    .zip(grad)
                {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *t -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

/// Minimizes mean cross-entropy by mini-batch descent from the seeded initialization.
pub fn train_classifier(
    spec: &NetworkSpec,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_compatible(spec, data)?;
    let mut params = initialize(spec, cfg.seed);
    if cfg.epochs > 0 && data.is_empty() {
        return Err(Error::Argument("cannot train on an empty dataset".into()));
    }

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(SHUFFLE_STREAM);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(DROPOUT_STREAM);

    let mut state = OptimizerState::new(cfg.optimizer, params.len());
    let mut grad = vec![0.0; params.len()];
    let mut snapshots = Vec::new();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let order = epoch_order(data, cfg.balance_classes, &mut shuffle_rng);
        for (batch_index, batch) in order.chunks(cfg.batch_size).enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let x = &data.inputs()[i];
                let y = data.labels()[i];
                let trace = forward_trace(
                    spec,
                    &params,
                    x,
                    cfg.dropout.as_ref().map(|d| (d, &mut dropout_rng)),
                )
                .map_err(|e| diverged(epoch, batch_index, &e.to_string()))?;
                let loss = -trace.probs[y].max(PROB_CLAMP).ln();
                if !loss.is_finite() {
                    return Err(diverged(epoch, batch_index, &format!("loss {loss}")));
                }
                let mut d_logits = trace.probs.clone();
                d_logits[y] -= 1.0;
                backprop_into(spec, &params, &trace, &d_logits, scale, &mut grad);
            }
            state.apply(&mut params.0, &grad, cfg.learning_rate);
            if let Some(v) = params.0.iter().find(|v| !v.is_finite()) {
                return Err(diverged(
                    epoch,
                    batch_index,
                    &format!("parameter became {v}"),
                ));
            }
        }
        let loss = mean_cross_entropy(spec, &params, data)
            .map_err(|e| diverged(epoch, 0, &e.to_string()))?;
        epoch_losses.push(loss);
        if cfg.snapshot_every_epoch {
            snapshots.push(params.clone());
        }
    }

    Ok(TrainOutcome {
        params,
        snapshots,
        epoch_losses,
    })
}

fn diverged(epoch: usize, batch: usize, what: &str) -> Error {
    Error::Numeric(format!(
        "training diverged in epoch {epoch}, batch {batch}: {what}; try a smaller learning rate"
    ))
}

/// Member `k` is trained with seed `base_seed + k`; everything else is shared.
pub fn train_ensemble(
    spec: &NetworkSpec,
    data: &Dataset,
    cfg: &TrainConfig,
    ens: &EnsembleConfig,
) -> Result<Vec<TrainOutcome>> {
    if ens.member_count == 0 {
        return Err(Error::Argument(
            "an ensemble needs at least one member".into(),
        ));
    }
    (0..ens.member_count as u64)
        .map(|k| {
            let member = TrainConfig {
                seed: ens.base_seed.wrapping_add(k),
                ..cfg.clone()
            };
            train_classifier(spec, data, &member)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::synth_blobs;

    fn logistic() -> (NetworkSpec, Dataset) {
        let spec = NetworkSpec::from_widths(&[1, 2]).unwrap();
        let data = Dataset::new(vec![vec![1.5]], vec![1], 2).unwrap();
        (spec, data)
    }

    #[test]
    fn zero_epochs_return_initialization() {
        let spec = NetworkSpec::from_widths(&[3, 5, 2]).unwrap();
        let data = synth_blobs(2, 5, 3, 0, 1.0).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            seed: 42,
            ..Default::default()
        };
        let out = train_classifier(&spec, &data, &cfg).unwrap();
        assert_eq!(out.params, initialize(&spec, 42));
        assert!(out.epoch_losses.is_empty());
    }

    #[test]
    fn initialization_respects_bounds() {
        let spec = NetworkSpec::from_widths(&[4, 6, 3]).unwrap();
        let p = initialize(&spec, 1);
        let theta = p.as_slice();
        let limit0 = (6.0f64 / 10.0).sqrt();
        assert!(theta[..24].iter().all(|w| w.abs() <= limit0));
        assert!(theta[24..30].iter().all(|&b| b == 0.0));
        assert!(theta[48..].iter().all(|&b| b == 0.0));
        assert_ne!(p, initialize(&spec, 2));
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let spec = NetworkSpec::from_widths(&[2, 4, 2]).unwrap();
        let data = synth_blobs(2, 8, 2, 3, 1.0).unwrap();
        for optimizer in [Optimizer::Sgd, Optimizer::SgdMomentum, Optimizer::Adam] {
            let cfg = TrainConfig {
                epochs: 3,
                batch_size: 4,
                learning_rate: 0.0,
                optimizer,
                ..Default::default()
            };
            let out = train_classifier(&spec, &data, &cfg).unwrap();
            assert_eq!(out.params, initialize(&spec, 0), "{optimizer}");
        }
    }

    #[test]
    fn single_sgd_step_matches_hand_gradient() {
        let (spec, data) = logistic();
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 1,
            learning_rate: 0.1,
            optimizer: Optimizer::Sgd,
            seed: 5,
            ..Default::default()
        };
        let init = initialize(&spec, 5);
        let [w0, w1, b0, b1] = init.as_slice().try_into().unwrap();
        let x = 1.5;
        let (z0, z1) = (w0 * x + b0, w1 * x + b1);
        let p0 = 1.0 / (1.0 + (z1 - z0).exp());
        let p1 = 1.0 - p0;
        // Cross-entropy gradient with label 1: (p - onehot) ⊗ [x, 1].
        let expected = [
            w0 - 0.1 * p0 * x,
            w1 - 0.1 * (p1 - 1.0) * x,
            b0 - 0.1 * p0,
            b1 - 0.1 * (p1 - 1.0),
        ];
        let got = train_classifier(&spec, &data, &cfg).unwrap().params;
        for (g, e) in got.as_slice().iter().zip(expected) {
            assert!((g - e).abs() < 1e-14, "{g} vs {e}");
        }
    }

    #[test]
    fn deterministic_runs() {
        let spec = NetworkSpec::from_widths(&[2, 8, 3]).unwrap();
        let data = synth_blobs(3, 20, 2, 9, 0.7).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 7,
            dropout: Some(DropoutConfig::bernoulli(0.3, 0).unwrap()),
            balance_classes: true,
            snapshot_every_epoch: true,
            ..Default::default()
        };
        let a = train_classifier(&spec, &data, &cfg).unwrap();
        let b = train_classifier(&spec, &data, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.snapshots.len(), 3);
        assert_eq!(a.snapshots[2], a.params);
        assert_eq!(a.epoch_losses, b.epoch_losses);
    }

    #[test]
    fn balanced_epochs_equalize_classes() {
        let inputs = (0..12).map(|i| vec![i as f64]).collect();
        let labels = vec![0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 2];
        let data = Dataset::new(inputs, labels, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut counts = [0usize; 3];
        for _ in 0..50 {
            let order = epoch_order(&data, true, &mut rng);
            assert_eq!(order.len(), 27);
            for i in order {
                counts[data.labels()[i]] += 1;
            }
        }
        assert_eq!(counts, [450, 450, 450]);
        let plain = epoch_order(&data, false, &mut rng);
        let mut sorted = plain.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn shape_checks() {
        let spec = NetworkSpec::from_widths(&[3, 2]).unwrap();
        let data = synth_blobs(2, 3, 2, 0, 1.0).unwrap();
        assert!(matches!(
            train_classifier(&spec, &data, &TrainConfig::default()),
            Err(Error::Shape(_))
        ));
        let spec3 = NetworkSpec::from_widths(&[2, 3]).unwrap();
        assert!(train_classifier(&spec3, &data, &TrainConfig::default()).is_err());
        let bad = TrainConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(
            train_classifier(&NetworkSpec::from_widths(&[2, 2]).unwrap(), &data, &bad).is_err()
        );
    }

    #[test]
    fn divergence_is_reported() {
        let spec = NetworkSpec::from_widths(&[2, 16, 2]).unwrap();
        let data = synth_blobs(2, 10, 2, 0, 1.0)
            .unwrap()
            .map_inputs(|_, x| Ok(x.iter().map(|v| v * 1e150).collect()))
            .unwrap();
        let cfg = TrainConfig {
            epochs: 5,
            learning_rate: 1e10,
            optimizer: Optimizer::Sgd,
            ..Default::default()
        };
        match train_classifier(&spec, &data, &cfg) {
            Err(Error::Numeric(msg)) => assert!(msg.contains("diverged"), "{msg}"),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn accuracy_examples() {
        let spec = NetworkSpec::from_widths(&[1, 2]).unwrap();
        let constant = ParameterVector::zeros(4);
        let data = Dataset::new(vec![vec![0.0], vec![1.0]], vec![0, 1], 2).unwrap();
        assert_eq!(evaluate_accuracy(&spec, &constant, &data).unwrap(), 0.5);
        let memorize = ParameterVector::new(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let one = Dataset::new(vec![vec![3.0]], vec![1], 2).unwrap();
        assert_eq!(evaluate_accuracy(&spec, &memorize, &one).unwrap(), 1.0);
    }

    #[test]
    fn ensemble_members_use_offset_seeds() {
        let spec = NetworkSpec::from_widths(&[2, 4, 2]).unwrap();
        let data = synth_blobs(2, 10, 2, 1, 0.5).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            seed: 99,
            ..Default::default()
        };
        let single = train_ensemble(
            &spec,
            &data,
            &cfg,
            &EnsembleConfig {
                member_count: 1,
                base_seed: 7,
            },
        )
        .unwrap();
        let direct = train_classifier(
            &spec,
            &data,
            &TrainConfig {
                seed: 7,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert_eq!(single[0].params, direct.params);
        let pair = train_ensemble(
            &spec,
            &data,
            &cfg,
            &EnsembleConfig {
                member_count: 2,
                base_seed: 7,
            },
        )
        .unwrap();
        assert_ne!(pair[0].params, pair[1].params);
        assert!(train_ensemble(
            &spec,
            &data,
            &cfg,
            &EnsembleConfig {
                member_count: 0,
                base_seed: 0
            }
        )
        .is_err());
    }
}
