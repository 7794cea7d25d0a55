//! Per-datapoint uncertainty scores.
//!
//! Every score is "higher means more unusual". Logarithms are natural, so
//! entropies are measured in nats and bounded by `ln C`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::netcore::{
    entropy_gradient, forward, forward_dropout, jvp_probabilities, perturb_params, DirectionVector,
    DropoutConfig, Model, NetworkSpec, ParameterVector, ProbabilityVector, PROB_CLAMP,
};

/// Gradients with a Euclidean norm below this are treated as zero.
pub const DEGENERATE_GRADIENT_NORM: f64 = 1e-15;

/// Default number of stochastic passes for the dropout entropy.
pub const DEFAULT_DROPOUT_PASSES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricKind {
    ErrorProb,
    Entropy,
    Fisher,
    FisherFd,
    McDropoutEntropy,
    EnsembleEntropy,
}

impl MetricKind {
    pub const ALL: [MetricKind; 6] = [
        MetricKind::ErrorProb,
        MetricKind::Entropy,
        MetricKind::Fisher,
        MetricKind::FisherFd,
        MetricKind::McDropoutEntropy,
        MetricKind::EnsembleEntropy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::ErrorProb => "error_prob",
            MetricKind::Entropy => "entropy",
            MetricKind::Fisher => "fisher",
            MetricKind::FisherFd => "fisher_fd",
            MetricKind::McDropoutEntropy => "mc_dropout_entropy",
            MetricKind::EnsembleEntropy => "ensemble_entropy",
        }
    }

    pub fn needs_ensemble(self) -> bool {
        self == MetricKind::EnsembleEntropy
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| Error::Argument(format!("unknown metric {s:?}")))
    }
}

/// How the entropy gradient is scaled before use as the direction `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DirectionNormalization {
    /// `v = -∂θH / ‖∂θH‖₂`.
    #[default]
    UnitNorm,
    /// `v = -∂θH` as is.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherSettings {
    pub direction: DirectionNormalization,
    /// Base step of the finite-difference Fisher form.
    pub fd_step: f64,
    /// Floor for probabilities in denominators and logarithms.
    pub prob_clamp: f64,
}

impl Default for FisherSettings {
    fn default() -> Self {
        Self {
            direction: DirectionNormalization::UnitNorm,
            fd_step: 1e-3,
            prob_clamp: PROB_CLAMP,
        }
    }
}

impl FisherSettings {
    pub fn new(direction: DirectionNormalization, fd_step: f64, prob_clamp: f64) -> Result<Self> {
        if !(fd_step > 0.0 && fd_step.is_finite()) {
            return Err(Error::Argument(format!(
                "fd_step must be positive, got {fd_step}"
            )));
        }
        if !(prob_clamp > 0.0 && prob_clamp <= 1e-6) {
            return Err(Error::Argument(format!(
                "prob_clamp must lie in (0, 1e-6], got {prob_clamp}"
            )));
        }
        Ok(Self {
            direction,
            fd_step,
            prob_clamp,
        })
    }

    pub fn raw() -> Self {
        Self {
            direction: DirectionNormalization::Raw,
            ..Self::default()
        }
    }
}

/// Probability of misclassification `1 - max_y p(y|x)`.
pub fn error_probability(p: &ProbabilityVector) -> f64 {
    1.0 - p.max()
}

/// Predictive entropy `-Σ p log max(p, 1e-12)`, in nats.
pub fn entropy(p: &ProbabilityVector) -> f64 {
    -p.as_slice()
        .iter()
        .map(|&v| v * v.max(PROB_CLAMP).ln())
        .sum::<f64>()
}

/// The direction `v = -∂θH(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherDirection {
    pub v: DirectionVector,
    /// The entropy gradient vanished (norm below [`DEGENERATE_GRADIENT_NORM`]);
    /// `v` is then the zero vector.
    pub degenerate: bool,
}

pub fn fisher_direction(
    spec: &NetworkSpec,
    params: &ParameterVector,
    x: &[f64],
    settings: &FisherSettings,
) -> Result<FisherDirection> {
    let grad = entropy_gradient(spec, params, x)?;
    let norm = grad.norm();
    if norm < DEGENERATE_GRADIENT_NORM {
        return Ok(FisherDirection {
            v: DirectionVector::zeros(grad.len()),
            degenerate: true,
        });
    }
    let factor = match settings.direction {
        DirectionNormalization::UnitNorm => -1.0 / norm,
        DirectionNormalization::Raw => -1.0,
    };
    Ok(FisherDirection {
        v: grad.scaled(factor),
        degenerate: false,
    })
}

/// `vᵀF(x)v = Σ_y (D_v p_y)² / max(p_y, clamp)` for a given direction, with
/// `D_v p` from one forward-mode pass.
pub fn fisher_form_along(
    spec: &NetworkSpec,
    params: &ParameterVector,
    x: &[f64],
    v: &DirectionVector,
    prob_clamp: f64,
) -> Result<f64> {
    let (p, dp) = jvp_probabilities(spec, params, x, v)?;
    let value: f64 = p
        .as_slice()
        .iter()
        .zip(&dp)
        .map(|(&p, d)| d * d / p.max(prob_clamp))
        .sum();
    if !value.is_finite() {
        return Err(Error::Numeric(format!("fisher form is {value}")));
    }
    Ok(value)
}

/// Fisher form in the negative-entropy-gradient direction.
pub fn fisher_form(
    spec: &NetworkSpec,
    params: &ParameterVector,
    x: &[f64],
    settings: &FisherSettings,
) -> Result<f64> {
    let dir = fisher_direction(spec, params, x, settings)?;
    if dir.degenerate {
        return Ok(0.0);
    }
    fisher_form_along(spec, params, x, &dir.v, settings.prob_clamp)
}

/// `Σ_y D_v p_y · D_v log p_y` with both derivatives taken by central
/// differences at step `fd_step / max(1, ‖v‖)`. Needs no backpropagation
/// beyond choosing `v`.
pub fn fisher_form_fd_along(
    spec: &NetworkSpec,
    params: &ParameterVector,
    x: &[f64],
    v: &DirectionVector,
    fd_step: f64,
    prob_clamp: f64,
) -> Result<f64> {
    let norm = v.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let h = fd_step / norm.max(1.0);
    let up = forward(spec, &perturb_params(params, v, h)?, x)?;
    let down = forward(spec, &perturb_params(params, v, -h)?, x)?;
    let value: f64 = up
        .as_slice()
        .iter()
        .zip(down.as_slice())
        .map(|(&pu, &pd)| {
            let dp = (pu - pd) / (2.0 * h);
            let dlogp = (pu.max(prob_clamp).ln() - pd.max(prob_clamp).ln()) / (2.0 * h);
            dp * dlogp
        })
        .sum();
    if !value.is_finite() {
        return Err(Error::Numeric(format!(
            "finite-difference fisher form is {value}"
        )));
    }
    Ok(value)
}

pub fn fisher_form_fd(
    spec: &NetworkSpec,
    params: &ParameterVector,
    x: &[f64],
    settings: &FisherSettings,
) -> Result<f64> {
    let dir = fisher_direction(spec, params, x, settings)?;
    fisher_form_fd_along(
        spec,
        params,
        x,
        &dir.v,
        settings.fd_step,
        settings.prob_clamp,
    )
}

/// `KL(p ‖ q) = Σ p log(p/q)`, with both probabilities clamped inside the log.
///
/// Evaluated as `Σ p (t - ln(1 + t)) - Σ p t` with `t = q/p - 1`: every term of
/// the first sum is nonnegative and the second is a sum of small differences,
/// which keeps the `O(ε²)` divergence between nearby distributions accurate.
pub fn kl_divergence(p: &ProbabilityVector, q: &ProbabilityVector) -> f64 {
    assert_eq!(
        p.len(),
        q.len(),
        "KL divergence of vectors of different length"
    );
    let mut convex = 0.0;
    let mut mass = 0.0;
    for (&pi, &qi) in p.as_slice().iter().zip(q.as_slice()) {
        let pc = pi.max(PROB_CLAMP);
        let qc = qi.max(PROB_CLAMP);
        let t = (qc - pc) / pc;
        convex += pi * (t - t.ln_1p());
        mass += pi * t;
    }
    (convex - mass).max(0.0)
}

/// Mean entropy over `passes` dropout predictions (pass indices `0..passes`).
pub fn mc_dropout_entropy(
    spec: &NetworkSpec,
    params: &ParameterVector,
    x: &[f64],
    cfg: &DropoutConfig,
    passes: usize,
) -> Result<f64> {
    if passes == 0 {
        return Err(Error::Argument(
            "dropout entropy needs at least one pass".into(),
        ));
    }
    let mut total = 0.0;
    for k in 0..passes {
        total += entropy(&forward_dropout(spec, params, x, cfg, k as u64)?);
    }
    Ok(total / passes as f64)
}

fn check_ensemble(members: &[Model]) -> Result<()> {
    let Some(first) = members.first() else {
        return Err(Error::Argument("ensemble has no members".into()));
    };
    for m in &members[1..] {
        if m.spec.input_width() != first.spec.input_width()
            || m.spec.class_count() != first.spec.class_count()
        {
            return Err(Error::Shape(
                "ensemble members disagree on input width or class count".into(),
            ));
        }
    }
    Ok(())
}

/// Mean of the members' predictive entropies.
pub fn ensemble_entropy(members: &[Model], x: &[f64]) -> Result<f64> {
    check_ensemble(members)?;
    let mut total = 0.0;
    for m in members {
        total += entropy(&m.forward(x)?);
    }
    Ok(total / members.len() as f64)
}

/// Entropy of the averaged (mixture) prediction of the members.
pub fn ensemble_mixture_entropy(members: &[Model], x: &[f64]) -> Result<f64> {
    check_ensemble(members)?;
    let mut mean = vec![0.0; members[0].spec.class_count()];
    for m in members {
        for (acc, p) in mean.iter_mut().zip(m.forward(x)?.as_slice()) {
            *acc += p;
        }
    }
    let n = members.len() as f64;
    let mean: Vec<f64> = mean.into_iter().map(|v| v / n).collect();
    Ok(entropy(&ProbabilityVector::new(mean)?))
}

/// Computes any [`MetricKind`] for a model and its scoring resources.
#[derive(Debug, Clone)]
pub struct Scorer<'a> {
    pub model: &'a Model,
    pub ensemble: &'a [Model],
    pub dropout: DropoutConfig,
    pub passes: usize,
    pub fisher: FisherSettings,
    /// Score ensembles by the entropy of the mixture instead of the mean entropy.
    pub ensemble_mixture: bool,
}

impl<'a> Scorer<'a> {
    /// Bernoulli dropout at rate 0.5 with seed 0, 32 passes, unit-norm direction.
    pub fn new(model: &'a Model) -> Self {
        Self {
            model,
            ensemble: &[],
            dropout: DropoutConfig::bernoulli(0.5, 0).expect("valid rate"),
            passes: DEFAULT_DROPOUT_PASSES,
            fisher: FisherSettings::default(),
            ensemble_mixture: false,
        }
    }

    pub fn with_ensemble(mut self, ensemble: &'a [Model]) -> Self {
        self.ensemble = ensemble;
        self
    }

    pub fn validate(&self, metrics: &[MetricKind]) -> Result<()> {
        if self.ensemble.is_empty() && metrics.iter().any(|m| m.needs_ensemble()) {
            return Err(Error::Argument(
                "ensemble_entropy requires an ensemble of models".into(),
            ));
        }
        if self.passes == 0 {
            return Err(Error::Argument("dropout passes must be at least 1".into()));
        }
        Ok(())
    }

    pub fn score(&self, metric: MetricKind, x: &[f64]) -> Result<f64> {
        let (spec, params) = (&self.model.spec, &self.model.params);
        match metric {
            MetricKind::ErrorProb => Ok(error_probability(&self.model.forward(x)?)),
            MetricKind::Entropy => Ok(entropy(&self.model.forward(x)?)),
            MetricKind::Fisher => fisher_form(spec, params, x, &self.fisher),
            MetricKind::FisherFd => fisher_form_fd(spec, params, x, &self.fisher),
            MetricKind::McDropoutEntropy => {
                mc_dropout_entropy(spec, params, x, &self.dropout, self.passes)
            }
            MetricKind::EnsembleEntropy => {
                if self.ensemble.is_empty() {
                    return Err(Error::Argument(
                        "ensemble_entropy requires an ensemble of models".into(),
                    ));
                }
                if self.ensemble_mixture {
                    ensemble_mixture_entropy(self.ensemble, x)
                } else {
                    ensemble_entropy(self.ensemble, x)
                }
            }
        }
    }
}
