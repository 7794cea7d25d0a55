//! Dense feedforward classifiers.
//!
//! A network is a [`NetworkSpec`] (the architecture) plus a flat
//! [`ParameterVector`]. Parameters are laid out layer by layer: the weight
//! matrix in row-major `(out, in)` order, then the bias vector. The softmax is
//! applied by [`forward`] and is never listed as a layer activation.

mod dropout;
mod model_file;
mod network;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dropout::{DropoutConfig, DropoutKind};
pub use model_file::{decode_model, encode_model, load_model, save_model, MAGIC};
pub use network::{
    backprop_into, entropy_gradient, entropy_logit_gradient, forward, forward_dropout,
    forward_trace, jvp_probabilities, logits, perturb_params, softmax, Trace,
};

/// Lower bound applied to probabilities inside every logarithm.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    #[serde(rename = "relu")]
    Relu,
    #[serde(rename = "id")]
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative at `z`; the ReLU kink uses the subgradient 0.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DenseLayerSpec {
    pub in_width: usize,
    pub out_width: usize,
    pub activation: Activation,
}

impl DenseLayerSpec {
    pub fn new(in_width: usize, out_width: usize, activation: Activation) -> Self {
        Self {
            in_width,
            out_width,
            activation,
        }
    }

    pub fn param_count(&self) -> usize {
        self.in_width * self.out_width + self.out_width
    }
}

/// Architecture of a dense classifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NetworkSpec {
    input_width: usize,
    class_count: usize,
    layers: Vec<DenseLayerSpec>,
}

impl NetworkSpec {
    pub fn new(
        input_width: usize,
        class_count: usize,
        layers: Vec<DenseLayerSpec>,
    ) -> Result<Self> {
        if input_width == 0 || class_count == 0 {
            return Err(Error::Shape(
                "input_width and class_count must be positive".into(),
            ));
        }
        let Some(first) = layers.first() else {
            return Err(Error::Shape("a network needs at least one layer".into()));
        };
        if first.in_width != input_width {
            return Err(Error::Shape(format!(
                "first layer reads {} inputs, network input width is {input_width}",
                first.in_width
            )));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_width == 0 || layer.out_width == 0 {
                return Err(Error::Shape(format!("layer {i} has a zero width")));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_width != pair[1].in_width {
                return Err(Error::Shape(format!(
                    "layer {i} emits {} values but layer {} reads {}",
                    pair[0].out_width,
                    i + 1,
                    pair[1].in_width
                )));
            }
        }
        let last = layers[layers.len() - 1];
        if last.out_width != class_count {
            return Err(Error::Shape(format!(
                "last layer emits {} values for {class_count} classes",
                last.out_width
            )));
        }
        Ok(Self {
            input_width,
            class_count,
            layers,
        })
    }

    /// Builds `w0 → w1 → … → wC` with ReLU hidden layers and an identity output layer.
    pub fn from_widths(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Shape(
                "an architecture needs an input and an output width".into(),
            ));
        }
        let n = widths.len() - 1;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i + 1 == n {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                DenseLayerSpec::new(w[0], w[1], act)
            })
            .collect();
        Self::new(widths[0], widths[n], layers)
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn layers(&self) -> &[DenseLayerSpec] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayerSpec::param_count).sum()
    }

    /// Offset of each layer's weight block inside the parameter vector.
    pub fn layer_offsets(&self) -> Vec<usize> {
        let mut offset = 0;
        self.layers
            .iter()
            .map(|l| {
                let at = offset;
                offset += l.param_count();
                at
            })
            .collect()
    }

    /// Widths `w0-w1-…-wC`; the inverse of [`NetworkSpec::from_widths`] for standard nets.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_width)
            .chain(self.layers.iter().map(|l| l.out_width))
            .collect()
    }

    pub(crate) fn check_params(&self, params: &ParameterVector) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "network has {} parameters, vector has {}",
                self.param_count(),
                params.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_width {
            return Err(Error::Shape(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.input_width
            )));
        }
        Ok(())
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let widths: Vec<String> = self.widths().iter().map(usize::to_string).collect();
        f.write_str(&widths.join("-"))
    }
}

impl FromStr for NetworkSpec {
    type Err = Error;

    /// Parses an architecture string such as `784-128-64-10`.
    fn from_str(s: &str) -> Result<Self> {
        let widths = s
            .split('-')
            .map(|w| {
                w.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Argument(format!("bad layer width {w:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_widths(&widths)
    }
}

/// Flat parameter vector θ. Every entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector(pub(crate) Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("parameter {i} is {}", values[i])));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Softmax output `(p(y|x))_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    /// Validates entries in `[0, 1]` summing to one within `1e-9`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Shape("empty probability vector".into()));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Argument(format!(
                "probabilities must lie in [0, 1]: {probs:?}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self(probs))
    }

    pub(crate) fn from_softmax(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest probability; ties go to the lowest class index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.0[self.argmax()]
    }
}

/// Direction `v` in parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionVector(Vec<f64>);

impl DirectionVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "direction entry {i} is {}",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|v| v * factor).collect())
    }
}

/// A network together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: NetworkSpec,
    pub params: ParameterVector,
}

impl Model {
    pub fn new(spec: NetworkSpec, params: ParameterVector) -> Result<Self> {
        spec.check_params(&params)?;
        Ok(Self { spec, params })
    }

    pub fn forward(&self, x: &[f64]) -> Result<ProbabilityVector> {
        forward(&self.spec, &self.params, x)
    }

    pub fn forward_dropout(
        &self,
        x: &[f64],
        cfg: &DropoutConfig,
        pass_index: u64,
    ) -> Result<ProbabilityVector> {
        forward_dropout(&self.spec, &self.params, x, cfg, pass_index)
    }

    pub fn entropy_gradient(&self, x: &[f64]) -> Result<DirectionVector> {
        entropy_gradient(&self.spec, &self.params, x)
    }
}
