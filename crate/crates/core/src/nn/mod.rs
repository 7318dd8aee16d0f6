//! Minimal dense neural-network engine.
//!
//! An MLP classifier with analytic forward/backward passes over a flat
//! `f64` parameter vector, per-sample output-layer gradient embeddings,
//! and first-order optimizers. Class masking realizes task-conditioned
//! heads: masked classes receive probability exactly zero and contribute
//! nothing to the loss or its gradient.

mod optim;

pub use optim::{OptAlgo, OptimizerHyper};

use crate::error::{Error, Result};
use crate::linalg::{gemm_nt, gemm_tn, Matrix};
use crate::seeds;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Hidden-layer activation. Only ReLU is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
}

/// MLP shape descriptor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    input_dim: usize,
    hidden_dims: Vec<usize>,
    num_classes: usize,
    activation: Activation,
}

impl Architecture {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, num_classes: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::contract("input_dim must be at least 1"));
        }
        if num_classes < 2 {
            return Err(Error::contract("num_classes must be at least 2"));
        }
        if hidden_dims.iter().any(|&h| h == 0) {
            return Err(Error::contract("hidden dims must be at least 1"));
        }
        Ok(Architecture {
            input_dim,
            hidden_dims,
            num_classes,
            activation: Activation::Relu,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dims(&self) -> &[usize] {
        &self.hidden_dims
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Width of the penultimate representation (last hidden layer, or the
    /// input itself for a linear model).
    pub fn penultimate_dim(&self) -> usize {
        self.hidden_dims.last().copied().unwrap_or(self.input_dim)
    }

    /// (fan_in, fan_out) per affine layer, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.num_classes);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Exact parameter count: weights plus biases per layer.
    pub fn param_count(&self) -> usize {
        self.layer_shapes()
            .iter()
            .map(|&(fan_in, fan_out)| fan_in * fan_out + fan_out)
            .sum()
    }
}

/// Adam accumulator state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

/// Model parameters plus optimizer state.
///
/// Parameters are stored as one flat layer-major vector:
/// `W1, b1, W2, b2, ...` with each `W` row-major `(fan_out, fan_in)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    arch: Architecture,
    params: Vec<f64>,
    opt_state: Option<AdamState>,
    rng_seed: u64,
}

/// Per-batch forward products.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// batch × num_classes raw logits.
    pub logits: Matrix,
    /// batch × penultimate_dim post-activation features.
    pub penultimate: Matrix,
    /// batch × num_classes masked-softmax probabilities.
    pub probs: Matrix,
}

/// Label source for the output-layer gradient embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PseudoLabel {
    /// Use the model's own argmax prediction.
    Predicted,
    /// Use the given label.
    True(usize),
}

/// Deterministic model initialization: weights uniform in
/// `±sqrt(6/(fan_in+fan_out))`, biases zero.
pub fn init_model(arch: &Architecture, seed: u64) -> ModelState {
    let mut rng = seeds::rng(seed, &[seeds::label::INIT]);
    let mut params = Vec::with_capacity(arch.param_count());
    for (fan_in, fan_out) in arch.layer_shapes() {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for _ in 0..fan_in * fan_out {
            params.push(rng.gen_range(-limit..limit));
        }
        params.extend(std::iter::repeat(0.0).take(fan_out));
    }
    ModelState {
        arch: arch.clone(),
        params,
        opt_state: None,
        rng_seed: seed,
    }
}

/// Offsets of each layer's weight and bias blocks in the flat vector.
fn layer_offsets(arch: &Architecture) -> Vec<(usize, usize)> {
    let mut offsets = Vec::new();
    let mut pos = 0;
    for (fan_in, fan_out) in arch.layer_shapes() {
        let w = pos;
        let b = pos + fan_in * fan_out;
        offsets.push((w, b));
        pos = b + fan_out;
    }
    offsets
}

fn check_mask(mask: Option<&[bool]>, num_classes: usize) -> Result<()> {
    if let Some(m) = mask {
        if m.len() != num_classes {
            return Err(Error::contract(format!(
                "class mask length {} does not match num_classes {}",
                m.len(),
                num_classes
            )));
        }
        if !m.iter().any(|&x| x) {
            return Err(Error::contract("class mask must allow at least one class"));
        }
    }
    Ok(())
}

/// Masked softmax of one logit row, written into `out`.
///
/// Masked classes get probability exactly 0; the rest are normalized with
/// the usual max-shift for stability.
fn masked_softmax_row(logits: &[f64], mask: Option<&[bool]>, out: &mut [f64]) {
    let allowed = |c: usize| mask.map_or(true, |m| m[c]);
    let mut max = f64::NEG_INFINITY;
    for (c, &z) in logits.iter().enumerate() {
        if allowed(c) && z > max {
            max = z;
        }
    }
    let mut sum = 0.0;
    for (c, &z) in logits.iter().enumerate() {
        if allowed(c) {
            let e = (z - max).exp();
            out[c] = e;
            sum += e;
        } else {
            out[c] = 0.0;
        }
    }
    for v in out.iter_mut() {
        *v /= sum;
    }
    // restore exact zeros clobbered by the division when sum is subnormal
    if let Some(m) = mask {
        for (c, v) in out.iter_mut().enumerate() {
            if !m[c] {
                *v = 0.0;
            }
        }
    }
}

struct ForwardScratch {
    /// Post-activation per layer: activations[0] = inputs, then hiddens,
    /// last entry = logits.
    activations: Vec<Matrix>,
}

impl ModelState {
    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn opt_state(&self) -> Option<&AdamState> {
        self.opt_state.as_ref()
    }

    pub(crate) fn opt_state_mut(&mut self) -> &mut Option<AdamState> {
        &mut self.opt_state
    }

    /// Drops optimizer accumulators; each training session starts its
    /// optimizer fresh.
    pub fn reset_opt_state(&mut self) {
        self.opt_state = None;
    }

    fn forward_internal(&self, inputs: &Matrix) -> ForwardScratch {
        assert_eq!(
            inputs.cols(),
            self.arch.input_dim,
            "input dim {} does not match architecture input dim {}",
            inputs.cols(),
            self.arch.input_dim
        );
        let offsets = layer_offsets(&self.arch);
        let shapes = self.arch.layer_shapes();
        let n = inputs.rows();
        let mut activations = Vec::with_capacity(shapes.len() + 1);
        activations.push(inputs.clone());
        for (l, &(fan_in, fan_out)) in shapes.iter().enumerate() {
            let (w_off, b_off) = offsets[l];
            let w = Matrix::from_vec(
                fan_out,
                fan_in,
                self.params[w_off..w_off + fan_in * fan_out].to_vec(),
            )
            .expect("layer weight block");
            let bias = &self.params[b_off..b_off + fan_out];
            let mut z = Matrix::zeros(n, fan_out);
            gemm_nt(1.0, activations.last().unwrap(), &w, 0.0, &mut z);
            let last_layer = l == shapes.len() - 1;
            for i in 0..n {
                let row = z.row_mut(i);
                for (v, &b) in row.iter_mut().zip(bias) {
                    *v += b;
                }
                if !last_layer {
                    for v in row.iter_mut() {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                }
            }
            activations.push(z);
        }
        ForwardScratch { activations }
    }

    /// Forward pass producing logits, penultimate features and
    /// masked-softmax probabilities.
    pub fn forward(&self, inputs: &Matrix, class_mask: Option<&[bool]>) -> Result<ForwardTrace> {
        if inputs.cols() != self.arch.input_dim {
            return Err(Error::contract(format!(
                "input dim {} does not match architecture input dim {}",
                inputs.cols(),
                self.arch.input_dim
            )));
        }
        if !inputs.is_finite() {
            return Err(Error::contract("inputs must be finite"));
        }
        check_mask(class_mask, self.arch.num_classes)?;
        let scratch = self.forward_internal(inputs);
        let n_layers = scratch.activations.len();
        let logits = scratch.activations[n_layers - 1].clone();
        let penultimate = scratch.activations[n_layers - 2].clone();
        let mut probs = Matrix::zeros(logits.rows(), logits.cols());
        for i in 0..logits.rows() {
            masked_softmax_row(logits.row(i), class_mask, probs.row_mut(i));
        }
        Ok(ForwardTrace {
            logits,
            penultimate,
            probs,
        })
    }

    /// Mean masked-softmax cross-entropy over the batch and its gradient
    /// with respect to the full flat parameter vector.
    pub fn loss_and_grad(
        &self,
        inputs: &Matrix,
        labels: &[usize],
        class_mask: Option<&[bool]>,
    ) -> Result<(f64, Vec<f64>)> {
        if labels.len() != inputs.rows() {
            return Err(Error::contract(format!(
                "{} labels for {} inputs",
                labels.len(),
                inputs.rows()
            )));
        }
        if inputs.rows() == 0 {
            return Err(Error::contract("empty batch"));
        }
        check_mask(class_mask, self.arch.num_classes)?;
        for &y in labels {
            if y >= self.arch.num_classes {
                return Err(Error::contract(format!(
                    "label {} outside {} classes",
                    y, self.arch.num_classes
                )));
            }
            if let Some(m) = class_mask {
                if !m[y] {
                    return Err(Error::contract(format!("label {} is masked out", y)));
                }
            }
        }

        let scratch = self.forward_internal(inputs);
        let n = inputs.rows();
        let n_layers = scratch.activations.len();
        let logits = &scratch.activations[n_layers - 1];
        let num_classes = self.arch.num_classes;
        let allowed = |c: usize| class_mask.map_or(true, |m| m[c]);

        // Loss via log-sum-exp over unmasked logits; gradient of the mean
        // CE w.r.t. logits is (p - onehot)/n on unmasked entries.
        let mut loss = 0.0;
        let mut d_logits = Matrix::zeros(n, num_classes);
        for i in 0..n {
            let row = logits.row(i);
            let mut max = f64::NEG_INFINITY;
            for c in 0..num_classes {
                if allowed(c) && row[c] > max {
                    max = row[c];
                }
            }
            let mut sum = 0.0;
            for c in 0..num_classes {
                if allowed(c) {
                    sum += (row[c] - max).exp();
                }
            }
            loss += -(row[labels[i]] - max - sum.ln());
            let d_row = d_logits.row_mut(i);
            for c in 0..num_classes {
                if allowed(c) {
                    let p = (row[c] - max).exp() / sum;
                    d_row[c] = (p - if c == labels[i] { 1.0 } else { 0.0 }) / n as f64;
                }
            }
        }
        loss /= n as f64;

        let grad = self.backward(&scratch, d_logits);
        Ok((loss, grad))
    }

    /// Backpropagates `d_out` (gradient w.r.t. logits) through the stored
    /// activations, returning the flat parameter gradient.
    fn backward(&self, scratch: &ForwardScratch, d_out: Matrix) -> Vec<f64> {
        let offsets = layer_offsets(&self.arch);
        let shapes = self.arch.layer_shapes();
        let mut grad = vec![0.0; self.params.len()];
        let mut delta = d_out;
        for l in (0..shapes.len()).rev() {
            let (fan_in, fan_out) = shapes[l];
            let (w_off, b_off) = offsets[l];
            let input_act = &scratch.activations[l];
            // dW = delta^T @ input_act
            {
                let mut dw = Matrix::zeros(fan_out, fan_in);
                gemm_tn(1.0, &delta, input_act, 0.0, &mut dw);
                grad[w_off..w_off + fan_in * fan_out].copy_from_slice(dw.as_slice());
            }
            for i in 0..delta.rows() {
                for (c, &d) in delta.row(i).iter().enumerate() {
                    grad[b_off + c] += d;
                }
            }
            if l > 0 {
                let w = Matrix::from_vec(
                    fan_out,
                    fan_in,
                    self.params[w_off..w_off + fan_in * fan_out].to_vec(),
                )
                .expect("layer weight block");
                let mut d_prev = Matrix::zeros(delta.rows(), fan_in);
                crate::linalg::gemm(1.0, &delta, &w, 0.0, &mut d_prev);
                // ReLU gate: post-activation > 0 iff pre-activation > 0
                let act = &scratch.activations[l];
                for i in 0..d_prev.rows() {
                    let a = act.row(i);
                    for (j, v) in d_prev.row_mut(i).iter_mut().enumerate() {
                        if a[j] <= 0.0 {
                            *v = 0.0;
                        }
                    }
                }
                delta = d_prev;
            }
        }
        grad
    }

    /// Forward pass followed by backprop from a caller-supplied gradient
    /// with respect to the logits. Returns the logits and the flat
    /// parameter gradient; the loss itself is the caller's business.
    pub fn grad_from_logit_gradient(
        &self,
        inputs: &Matrix,
        make_d_logits: impl FnOnce(&Matrix) -> Matrix,
    ) -> Result<(Matrix, Vec<f64>)> {
        if inputs.cols() != self.arch.input_dim {
            return Err(Error::contract(format!(
                "input dim {} does not match architecture input dim {}",
                inputs.cols(),
                self.arch.input_dim
            )));
        }
        let scratch = self.forward_internal(inputs);
        let logits = scratch.activations.last().expect("logits").clone();
        let d_logits = make_d_logits(&logits);
        if d_logits.rows() != logits.rows() || d_logits.cols() != logits.cols() {
            return Err(Error::contract("logit gradient shape mismatch"));
        }
        let grad = self.backward(&scratch, d_logits);
        Ok((logits, grad))
    }

    /// BADGE-style gradient embedding: the cross-entropy gradient of one
    /// sample restricted to the output layer, using the predicted or given
    /// label. Layout matches the output layer's flat parameter block:
    /// weight entries `(class, feature)` row-major, then biases.
    pub fn gradient_embedding(&self, input: &[f64], pseudo: PseudoLabel) -> Result<Vec<f64>> {
        if input.len() != self.arch.input_dim {
            return Err(Error::contract(format!(
                "input dim {} does not match architecture input dim {}",
                input.len(),
                self.arch.input_dim
            )));
        }
        let inputs = Matrix::from_vec(1, input.len(), input.to_vec())?;
        let trace = self.forward(&inputs, None)?;
        let probs = trace.probs.row(0);
        let y = match pseudo {
            PseudoLabel::Predicted => {
                let mut best = 0;
                for (c, &p) in probs.iter().enumerate() {
                    if p > probs[best] {
                        best = c;
                    }
                }
                best
            }
            PseudoLabel::True(label) => {
                if label >= self.arch.num_classes {
                    return Err(Error::contract(format!(
                        "label {} outside {} classes",
                        label, self.arch.num_classes
                    )));
                }
                label
            }
        };
        let pen = trace.penultimate.row(0);
        let h = pen.len();
        let c_total = self.arch.num_classes;
        let mut out = vec![0.0; c_total * (h + 1)];
        for c in 0..c_total {
            let coeff = probs[c] - if c == y { 1.0 } else { 0.0 };
            for (j, &f) in pen.iter().enumerate() {
                out[c * h + j] = coeff * f;
            }
            out[c_total * h + c] = coeff;
        }
        Ok(out)
    }

    /// Applies one optimizer update, consuming the state and returning the
    /// updated one. Rejects non-finite or mis-sized gradients.
    pub fn optimizer_step(self, grad: &[f64], hyper: &OptimizerHyper) -> Result<ModelState> {
        optim::step(self, grad, hyper)
    }
}

#[cfg(test)]
mod tests;
