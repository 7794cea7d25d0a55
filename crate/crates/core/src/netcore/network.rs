use rand::Rng;

use super::{
    DirectionVector, DropoutConfig, NetworkSpec, ParameterVector, ProbabilityVector, PROB_CLAMP,
};
use crate::error::{Error, Result};

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input of each layer; entry 0 is `x`, entry `l + 1` the (masked) output of layer `l`.
    pub layer_inputs: Vec<Vec<f64>>,
    /// Pre-activation `W a + b` of each layer.
    pub pre_activations: Vec<Vec<f64>>,
    /// Dropout multipliers applied to each hidden layer's output.
    pub masks: Vec<Option<Vec<f64>>>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Numerically stable softmax (max-logit subtraction).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("{what} contains {v}")));
    }
    Ok(())
}

/// Runs the network on `x`, optionally multiplying each hidden output by a
/// dropout mask drawn from `rng`.
pub fn forward_trace<R: Rng + ?Sized>(
    spec: &NetworkSpec,
    params: &ParameterVector,
    x: &[f64],
    mut dropout: Option<(&DropoutConfig, &mut R)>,
) -> Result<Trace> {
    spec.check_params(params)?;
    spec.check_input(x)?;
    let theta = params.as_slice();
    let layers = spec.layers();
    let hidden = layers.len() - 1;

    let mut layer_inputs = Vec::with_capacity(layers.len());
    let mut pre_activations = Vec::with_capacity(layers.len());
    let mut masks = Vec::with_capacity(hidden);
    let mut current = x.to_vec();
    let mut offset = 0;

    for (l, layer) in layers.iter().enumerate() {
        let (n_in, n_out) = (layer.in_width, layer.out_width);
        let weights = &theta[offset..offset + n_in * n_out];
        let biases = &theta[offset + n_in * n_out..offset + layer.param_count()];
        offset += layer.param_count();

        let z: Vec<f64> = (0..n_out)
            .map(|o| {
                let row = &weights[o * n_in..(o + 1) * n_in];
                row.iter().zip(&current).map(|(w, a)| w * a).sum::<f64>() + biases[o]
            })
            .collect();
        let mut out: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();

        if l < hidden {
            let mask = dropout
                .as_mut()
                .map(|(cfg, rng)| cfg.sample_mask(&mut **rng, n_out));
            if let Some(mask) = &mask {
                out.iter_mut().zip(mask).for_each(|(a, m)| *a *= m);
            }
            masks.push(mask);
        }
        layer_inputs.push(std::mem::replace(&mut current, out));
        pre_activations.push(z);
    }

    check_finite(&current, "logits")?;
    let probs = softmax(&current);
    check_finite(&probs, "softmax output")?;
    Ok(Trace {
        layer_inputs,
        pre_activations,
        masks,
        logits: current,
        probs,
    })
}

fn plain_trace(spec: &NetworkSpec, params: &ParameterVector, x: &[f64]) -> Result<Trace> {
    forward_trace::<rand_chacha::ChaCha8Rng>(spec, params, x, None)
}

/// Final-layer outputs before the softmax.
pub fn logits(spec: &NetworkSpec, params: &ParameterVector, x: &[f64]) -> Result<Vec<f64>> {
    plain_trace(spec, params, x).map(|t| t.logits)
}

/// Deterministic forward pass: softmax of the final-layer outputs.
pub fn forward(
    spec: &NetworkSpec,
    params: &ParameterVector,
    x: &[f64],
) -> Result<ProbabilityVector> {
    plain_trace(spec, params, x).map(|t| ProbabilityVector::from_softmax(t.probs))
}

/// Forward pass with dropout on hidden outputs; a pure function of
/// `(spec, params, x, cfg, pass_index)`.
pub fn forward_dropout(
    spec: &NetworkSpec,
    params: &ParameterVector,
    x: &[f64],
    cfg: &DropoutConfig,
    pass_index: u64,
) -> Result<ProbabilityVector> {
    let mut rng = cfg.pass_rng(pass_index);
    forward_trace(spec, params, x, Some((cfg, &mut rng)))
        .map(|t| ProbabilityVector::from_softmax(t.probs))
}

/// Gradient of the clamped entropy `-Σ p log max(p, 1e-12)` with respect to the logits.
pub fn entropy_logit_gradient(probs: &[f64]) -> Vec<f64> {
    let dh_dp: Vec<f64> = probs
        .iter()
        .map(|&p| {
            if p > PROB_CLAMP {
                -(p.ln() + 1.0)
            } else {
                -PROB_CLAMP.ln()
            }
        })
        .collect();
    let mean: f64 = probs.iter().zip(&dh_dp).map(|(p, g)| p * g).sum();
    probs
        .iter()
        .zip(&dh_dp)
        .map(|(p, g)| p * (g - mean))
        .collect()
}

/// Adds `scale · ∂L/∂θ` into `grad`, given `∂L/∂logits` for the traced pass.
pub fn backprop_into(
    spec: &NetworkSpec,
    params: &ParameterVector,
    trace: &Trace,
    d_logits: &[f64],
    scale: f64,
    grad: &mut [f64],
) {
    let theta = params.as_slice();
    let layers = spec.layers();
    let offsets = spec.layer_offsets();
    let last = layers.len() - 1;

    let mut delta: Vec<f64> = d_logits
        .iter()
        .zip(&trace.pre_activations[last])
        .map(|(d, &z)| scale * d * layers[last].activation.derivative(z))
        .collect();

    for l in (0..layers.len()).rev() {
        let layer = &layers[l];
        let (n_in, n_out) = (layer.in_width, layer.out_width);
        let offset = offsets[l];
        let a_in = &trace.layer_inputs[l];

        for o in 0..n_out {
            let d = delta[o];
            if d != 0.0 {
                let row = &mut grad[offset + o * n_in..offset + (o + 1) * n_in];
                row.iter_mut().zip(a_in).for_each(|(g, a)| *g += d * a);
            }
            grad[offset + n_in * n_out + o] += d;
        }

        if l == 0 {
            break;
        }
        let weights = &theta[offset..offset + n_in * n_out];
        let mut d_in = vec![0.0; n_in];
        for o in 0..n_out {
            let d = delta[o];
            if d != 0.0 {
                let row = &weights[o * n_in..(o + 1) * n_in];
                d_in.iter_mut().zip(row).for_each(|(di, w)| *di += d * w);
            }
        }
        let prev = &layers[l - 1];
        let mask = trace.masks[l - 1].as_deref();
        delta = d_in
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                let m = mask.map_or(1.0, |m| m[i]);
                d * m * prev.activation.derivative(trace.pre_activations[l - 1][i])
            })
            .collect();
    }
}

/// Exact gradient `∂θ H(x)` of the predictive entropy, by reverse mode.
pub fn entropy_gradient(
    spec: &NetworkSpec,
    params: &ParameterVector,
    x: &[f64],
) -> Result<DirectionVector> {
    let trace = plain_trace(spec, params, x)?;
    let d_logits = entropy_logit_gradient(&trace.probs);
    let mut grad = vec![0.0; params.len()];
    backprop_into(spec, params, &trace, &d_logits, 1.0, &mut grad);
    check_finite(&grad, "entropy gradient")?;
    Ok(DirectionVector(grad))
}

/// Returns `p(x)` and the directional derivative `D_v p(x)` by forward-mode
/// propagation of the parameter tangent `v`.
pub fn jvp_probabilities(
    spec: &NetworkSpec,
    params: &ParameterVector,
    x: &[f64],
    v: &DirectionVector,
) -> Result<(ProbabilityVector, Vec<f64>)> {
    spec.check_params(params)?;
    spec.check_input(x)?;
    if v.len() != params.len() {
        return Err(Error::Shape(format!(
            "direction has {} entries, parameters {}",
            v.len(),
            params.len()
        )));
    }
    let theta = params.as_slice();
    let tangent = v.as_slice();

    let mut a = x.to_vec();
    let mut da = vec![0.0; x.len()];
    let mut offset = 0;
    for layer in spec.layers() {
        let (n_in, n_out) = (layer.in_width, layer.out_width);
        let w = &theta[offset..offset + n_in * n_out];
        let dw = &tangent[offset..offset + n_in * n_out];
        let b = &theta[offset + n_in * n_out..offset + layer.param_count()];
        let db = &tangent[offset + n_in * n_out..offset + layer.param_count()];
        offset += layer.param_count();

        let mut next = Vec::with_capacity(n_out);
        let mut dnext = Vec::with_capacity(n_out);
        for o in 0..n_out {
            let row = o * n_in..(o + 1) * n_in;
            let z: f64 = w[row.clone()]
                .iter()
                .zip(&a)
                .map(|(w, a)| w * a)
                .sum::<f64>()
                + b[o];
            let dz: f64 = w[row.clone()]
                .iter()
                .zip(&da)
                .map(|(w, d)| w * d)
                .sum::<f64>()
                + dw[row].iter().zip(&a).map(|(d, a)| d * a).sum::<f64>()
                + db[o];
            next.push(layer.activation.apply(z));
            dnext.push(layer.activation.derivative(z) * dz);
        }
        a = next;
        da = dnext;
    }

    check_finite(&a, "logits")?;
    let p = softmax(&a);
    let mean: f64 = p.iter().zip(&da).map(|(p, d)| p * d).sum();
    let dp: Vec<f64> = p.iter().zip(&da).map(|(p, d)| p * (d - mean)).collect();
    check_finite(&dp, "probability derivative")?;
    Ok((ProbabilityVector::from_softmax(p), dp))
}

/// `θ + ε·v`.
pub fn perturb_params(
    params: &ParameterVector,
    v: &DirectionVector,
    epsilon: f64,
) -> Result<ParameterVector> {
    if params.len() != v.len() {
        return Err(Error::Shape(format!(
            "direction has {} entries, parameters {}",
            v.len(),
            params.len()
        )));
    }
    let values = params
        .as_slice()
        .iter()
        .zip(v.as_slice())
        .map(|(t, d)| t + epsilon * d)
        .collect();
    ParameterVector::new(values)
}
