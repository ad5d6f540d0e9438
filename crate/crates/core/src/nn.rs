//! Minimal feed-forward network with analytic gradients.
//!
//! The density-ratio estimator is a plain MLP: affine layers with a smooth
//! activation on every hidden layer and a linear final layer. Besides the
//! usual parameter gradients, the flow needs gradients of the output with
//! respect to the *inputs* (the drift is `grad_x f'(r(x))`), so the backward
//! pass produces both.
//!
//! All arithmetic is `f64`. Parameters flatten to a single vector (layer by
//! layer, weights row-major then bias) shared by the Adam and EMA states.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::rng::{stream, StreamRole};
use crate::{BregmanObjective, Error, Result};

/// Hidden-layer activation.
///
/// Softplus is the default: the flow differentiates through the network with
/// respect to its inputs, and a smooth activation keeps those gradients
/// well-defined everywhere. LeakyReLU (slope 0.2) is available but its kinks
/// make finite-difference checks unreliable near zero pre-activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Softplus,
    LeakyRelu,
}

const LEAKY_SLOPE: f64 = 0.2;

impl Activation {
    pub fn tag(self) -> &'static str {
        match self {
            Activation::Softplus => "softplus",
            Activation::LeakyRelu => "leaky_relu",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "softplus" => Ok(Activation::Softplus),
            "leaky_relu" => Ok(Activation::LeakyRelu),
            other => Err(Error::InvalidParameter {
                what: format!("unknown activation tag {other:?}"),
            }),
        }
    }

    /// Activation value and its derivative, sharing one `exp`.
    #[inline]
    fn value_and_slope(self, x: f64) -> (f64, f64) {
        match self {
            Activation::Softplus => {
                // softplus(x) = max(x, 0) + log1p(exp(-|x|)); slope = sigmoid(x)
                let e = (-x.abs()).exp();
                let lp = e.ln_1p();
                if x >= 0.0 {
                    (x + lp, 1.0 / (1.0 + e))
                } else {
                    (lp, e / (1.0 + e))
                }
            }
            Activation::LeakyRelu => {
                if x >= 0.0 {
                    (x, 1.0)
                } else {
                    (LEAKY_SLOPE * x, LEAKY_SLOPE)
                }
            }
        }
    }
}

/// Output-head semantics of a ratio model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// Raw output is the ratio `r(x)` itself (LSIF).
    DirectRatio,
    /// Raw output is `log r(x)` (LR).
    LogRatio,
}

impl Head {
    pub fn tag(self) -> &'static str {
        match self {
            Head::DirectRatio => "direct_ratio",
            Head::LogRatio => "log_ratio",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "direct_ratio" => Ok(Head::DirectRatio),
            "log_ratio" => Ok(Head::LogRatio),
            other => Err(Error::InvalidParameter {
                what: format!("unknown head tag {other:?}"),
            }),
        }
    }

    /// The Bregman objective this head is paired with.
    pub fn objective(self) -> BregmanObjective {
        match self {
            Head::DirectRatio => BregmanObjective::Lsif,
            Head::LogRatio => BregmanObjective::Lr,
        }
    }
}

/// One affine layer: weights `(out x in)` row-major plus a bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: Matrix,
    bias: Vec<f64>,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        if weights.rows() != bias.len() {
            return Err(Error::DimensionMismatch {
                context: "Layer::new bias",
                expected: weights.rows(),
                got: bias.len(),
            });
        }
        Ok(Self { weights, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn param_count(&self) -> usize {
        self.weights.as_slice().len() + self.bias.len()
    }
}

/// A feed-forward network: hidden layers activated, final layer linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    activation: Activation,
}

impl Mlp {
    /// He-style fan-in initialization (`w ~ N(0, 2/fan_in)`, biases zero),
    /// deterministic in the seed.
    pub fn new_seeded(dims: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidParameter {
                what: format!("network needs at least input and output dims, got {dims:?}"),
            });
        }
        if dims.contains(&0) {
            return Err(Error::InvalidParameter {
                what: format!("layer dims must be positive, got {dims:?}"),
            });
        }
        let mut rng = stream(seed, StreamRole::Init, 0);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let std = (2.0 / fan_in as f64).sqrt();
            let data: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| std * rng.sample::<f64, _>(StandardNormal))
                .collect();
            layers.push(Layer {
                weights: Matrix::from_vec(fan_out, fan_in, data)?,
                bias: vec![0.0; fan_out],
            });
        }
        Ok(Self { layers, activation })
    }

    /// Builds from explicit layers; consecutive dimensions must chain.
    pub fn from_layers(layers: Vec<Layer>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter {
                what: "network needs at least one layer".into(),
            });
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::DimensionMismatch {
                    context: "Mlp::from_layers chaining",
                    expected: pair[0].out_dim(),
                    got: pair[1].in_dim(),
                });
            }
        }
        Ok(Self { layers, activation })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    /// `[d, h1, ..., out]`
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(Layer::out_dim));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Flattened parameters: per layer, weights row-major then bias.
    pub fn param_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            v.extend_from_slice(layer.weights.as_slice());
            v.extend_from_slice(&layer.bias);
        }
        v
    }

    pub fn set_param_vector(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                context: "Mlp::set_param_vector",
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let wn = layer.weights.as_slice().len();
            layer
                .weights
                .as_mut_slice()
                .copy_from_slice(&params[offset..offset + wn]);
            offset += wn;
            let bn = layer.bias.len();
            layer.bias.copy_from_slice(&params[offset..offset + bn]);
            offset += bn;
        }
        Ok(())
    }

    fn check_input(&self, x: &Matrix, context: &'static str) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.input_dim(),
                got: x.cols(),
            });
        }
        Ok(())
    }

    /// Batched forward pass; returns `n x out_dim` raw outputs.
    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x, "Mlp::forward_batch input dim")?;
        let mut scratch = Scratch::new(self);
        let mut out = Matrix::zeros(x.rows(), self.output_dim());
        for i in 0..x.rows() {
            self.forward_sample(x.row(i), &mut scratch);
            out.row_mut(i).copy_from_slice(scratch.output());
        }
        Ok(out)
    }

    /// Full reverse-mode pass.
    ///
    /// `cotangents` is `n x out_dim` (d objective / d output per sample).
    /// Returns parameter gradients summed over the batch (flat layout) and
    /// per-sample input gradients.
    pub fn backward_batch(&self, x: &Matrix, cotangents: &Matrix) -> Result<(Vec<f64>, Matrix)> {
        self.check_input(x, "Mlp::backward_batch input dim")?;
        if cotangents.rows() != x.rows() || cotangents.cols() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                context: "Mlp::backward_batch cotangents",
                expected: x.rows() * self.output_dim(),
                got: cotangents.rows() * cotangents.cols(),
            });
        }
        let mut scratch = Scratch::new(self);
        let offsets = self.layer_offsets_vec();
        let mut param_grads = vec![0.0; self.param_count()];
        let mut input_grads = Matrix::zeros(x.rows(), self.input_dim());
        for i in 0..x.rows() {
            self.forward_sample(x.row(i), &mut scratch);
            self.backward_sample(
                x.row(i),
                cotangents.row(i),
                &mut scratch,
                Some((&mut param_grads, &offsets)),
                input_grads.row_mut(i),
            );
        }
        Ok((param_grads, input_grads))
    }

    /// Forward pass plus input gradients, with the cotangent computed from
    /// each sample's output. Skips parameter-gradient accumulation; this is
    /// the flow's hot path.
    pub fn forward_input_grads_with<F>(&self, x: &Matrix, mut cot: F) -> Result<(Matrix, Matrix)>
    where
        F: FnMut(usize, &[f64], &mut [f64]),
    {
        self.check_input(x, "Mlp::forward_input_grads_with input dim")?;
        let mut scratch = Scratch::new(self);
        let mut outputs = Matrix::zeros(x.rows(), self.output_dim());
        let mut input_grads = Matrix::zeros(x.rows(), self.input_dim());
        let mut cot_buf = vec![0.0; self.output_dim()];
        for i in 0..x.rows() {
            self.forward_sample(x.row(i), &mut scratch);
            outputs.row_mut(i).copy_from_slice(scratch.output());
            cot(i, scratch.output(), &mut cot_buf);
            self.backward_sample(x.row(i), &cot_buf, &mut scratch, None, input_grads.row_mut(i));
        }
        Ok((outputs, input_grads))
    }

    fn forward_sample(&self, x: &[f64], scratch: &mut Scratch) {
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (before, rest) = scratch.post.split_at_mut(l);
            let input: &[f64] = if l == 0 { x } else { &before[l - 1] };
            let post = &mut rest[0];
            let slope = &mut scratch.slope[l];
            let w = layer.weights.as_slice();
            let in_dim = layer.in_dim();
            for o in 0..layer.out_dim() {
                let row = &w[o * in_dim..(o + 1) * in_dim];
                let z = layer.bias[o] + dot(row, input);
                if l == last {
                    post[o] = z;
                    slope[o] = 1.0;
                } else {
                    let (v, s) = self.activation.value_and_slope(z);
                    post[o] = v;
                    slope[o] = s;
                }
            }
        }
    }

    /// Backpropagates one sample's cotangent. `forward_sample` must have run
    /// for the same input. `param_grads` accumulates when provided;
    /// `input_grad` is overwritten.
    fn backward_sample(
        &self,
        x: &[f64],
        cotangent: &[f64],
        scratch: &mut Scratch,
        mut param_grads: Option<(&mut Vec<f64>, &[usize])>,
        input_grad: &mut [f64],
    ) {
        scratch.delta[..cotangent.len()].copy_from_slice(cotangent);
        let mut delta_len = cotangent.len();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let w = layer.weights.as_slice();
            let in_dim = layer.in_dim();
            let input: &[f64] = if l == 0 { x } else { &scratch.post[l - 1] };
            debug_assert_eq!(delta_len, layer.out_dim());

            if let Some((grads, offsets)) = param_grads.as_mut() {
                let base = offsets[l];
                for o in 0..layer.out_dim() {
                    let d = scratch.delta[o];
                    let grow = &mut grads[base + o * in_dim..base + (o + 1) * in_dim];
                    for (g, xi) in grow.iter_mut().zip(input) {
                        *g += d * *xi;
                    }
                }
                let bbase = base + layer.out_dim() * in_dim;
                for o in 0..layer.out_dim() {
                    grads[bbase + o] += scratch.delta[o];
                }
            }

            scratch.prev_delta[..in_dim].fill(0.0);
            for o in 0..layer.out_dim() {
                let d = scratch.delta[o];
                let row = &w[o * in_dim..(o + 1) * in_dim];
                for (pd, wi) in scratch.prev_delta[..in_dim].iter_mut().zip(row) {
                    *pd += wi * d;
                }
            }
            if l > 0 {
                for (pd, s) in scratch.prev_delta[..in_dim].iter_mut().zip(&scratch.slope[l - 1]) {
                    *pd *= s;
                }
            }
            scratch.delta[..in_dim].copy_from_slice(&scratch.prev_delta[..in_dim]);
            delta_len = in_dim;
        }
        input_grad.copy_from_slice(&scratch.delta[..delta_len]);
    }
}

/// Dot product with four accumulators; the split dependency chains let the
/// scalar pipeline overlap the adds.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    let chunks = n / 4;
    for c in 0..chunks {
        let i = c * 4;
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    let mut rest = 0.0;
    for i in chunks * 4..n {
        rest += a[i] * b[i];
    }
    (s0 + s1) + (s2 + s3) + rest
}

// Flat-parameter offsets per layer, computed once per Mlp construction would
// need interior caching; a derived field keeps it simple.
impl Mlp {
    fn layer_offsets_vec(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut acc = 0;
        for layer in &self.layers {
            offsets.push(acc);
            acc += layer.param_count();
        }
        offsets
    }
}

// Scratch buffers reused across samples within one batched call.
struct Scratch {
    post: Vec<Vec<f64>>,
    slope: Vec<Vec<f64>>,
    delta: Vec<f64>,
    prev_delta: Vec<f64>,
}

impl Scratch {
    fn new(mlp: &Mlp) -> Self {
        let post: Vec<Vec<f64>> = mlp.layers.iter().map(|l| vec![0.0; l.out_dim()]).collect();
        let slope = post.clone();
        let max_dim = mlp.dims().into_iter().max().unwrap_or(1);
        Self {
            post,
            slope,
            delta: vec![0.0; max_dim],
            prev_delta: vec![0.0; max_dim],
        }
    }

    fn output(&self) -> &[f64] {
        self.post.last().unwrap()
    }
}

/// The density-ratio network: an [`Mlp`] with a scalar output and a head
/// convention. Callers interpret the raw output as `r` or `log r` according
/// to the head.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityRatioModel {
    mlp: Mlp,
    head: Head,
}

impl std::ops::Deref for DensityRatioModel {
    type Target = Mlp;
    fn deref(&self) -> &Mlp {
        &self.mlp
    }
}

impl DensityRatioModel {
    /// Default toy architecture: three hidden layers of 128 units.
    pub const DEFAULT_HIDDEN: [usize; 3] = [128, 128, 128];

    pub fn new_seeded(
        input_dim: usize,
        hidden: &[usize],
        activation: Activation,
        head: Head,
        seed: u64,
    ) -> Result<Self> {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let mlp = Mlp::new_seeded(&dims, activation, seed)?;
        Self::from_mlp(mlp, head)
    }

    pub fn from_mlp(mlp: Mlp, head: Head) -> Result<Self> {
        if mlp.output_dim() != 1 {
            return Err(Error::DimensionMismatch {
                context: "DensityRatioModel output dim",
                expected: 1,
                got: mlp.output_dim(),
            });
        }
        Ok(Self { mlp, head })
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn set_param_vector(&mut self, params: &[f64]) -> Result<()> {
        self.mlp.set_param_vector(params)
    }

    /// Per-sample scalar outputs.
    pub fn forward(&self, x: &Matrix) -> Result<Vec<f64>> {
        let out = self.mlp.forward_batch(x)?;
        Ok(out.as_slice().to_vec())
    }

    /// Reverse-mode gradients of `sum_i cotangent[i] * output_i`.
    ///
    /// Returns (parameter gradients summed over the batch, per-sample input
    /// gradients).
    pub fn grads(&self, x: &Matrix, cotangent: &[f64]) -> Result<(Vec<f64>, Matrix)> {
        if cotangent.len() != x.rows() {
            return Err(Error::DimensionMismatch {
                context: "DensityRatioModel::grads cotangent",
                expected: x.rows(),
                got: cotangent.len(),
            });
        }
        let cot = Matrix::from_vec(x.rows(), 1, cotangent.to_vec())?;
        self.mlp.backward_batch(x, &cot)
    }

    /// Outputs plus input gradients scaled per sample by `scale(output)`.
    /// Used by the flow drift, where the scale is the chain-rule factor.
    pub fn forward_scaled_input_grads<F>(&self, x: &Matrix, mut scale: F) -> Result<(Vec<f64>, Matrix)>
    where
        F: FnMut(f64) -> f64,
    {
        let (outs, grads) = self
            .mlp
            .forward_input_grads_with(x, |_, out, cot| cot[0] = scale(out[0]))?;
        Ok((outs.as_slice().to_vec(), grads))
    }
}

/// Spec-named wrapper over [`DensityRatioModel::forward`].
pub fn mlp_forward(model: &DensityRatioModel, x: &Matrix) -> Result<Vec<f64>> {
    model.forward(x)
}

/// Spec-named wrapper over [`DensityRatioModel::grads`].
pub fn mlp_grads(
    model: &DensityRatioModel,
    x: &Matrix,
    cotangent: &[f64],
) -> Result<(Vec<f64>, Matrix)> {
    model.grads(x, cotangent)
}

/// Adam optimizer state, shaped like the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        Self::with_hyper(param_count, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(param_count: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            m1: vec![0.0; param_count],
            m2: vec![0.0; param_count],
            t: 0,
            beta1,
            beta2,
            eps,
        }
    }
}

/// One bias-corrected Adam update, in place. `t` increments by exactly 1.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [f64],
    grads: &[f64],
    lr: f64,
) -> Result<()> {
    if params.len() != state.m1.len() || grads.len() != params.len() {
        return Err(Error::DimensionMismatch {
            context: "adam_step shapes",
            expected: state.m1.len(),
            got: if params.len() != state.m1.len() {
                params.len()
            } else {
                grads.len()
            },
        });
    }
    if !(lr > 0.0) {
        return Err(Error::InvalidParameter {
            what: format!("Adam learning rate must be positive, got {lr}"),
        });
    }
    if let Some(param_index) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { param_index });
    }
    state.t += 1;
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m1[i] = state.beta1 * state.m1[i] + (1.0 - state.beta1) * g;
        state.m2[i] = state.beta2 * state.m2[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m1[i] / bc1;
        let v_hat = state.m2[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

/// Exponential moving average of the parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaParams {
    pub values: Vec<f64>,
    pub decay: f64,
}

impl EmaParams {
    /// Starts the average at the current parameters.
    pub fn new(params: &[f64], decay: f64) -> Self {
        Self {
            values: params.to_vec(),
            decay,
        }
    }

    /// `ema' = m * ema + (1 - m) * params`, elementwise.
    pub fn update(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                context: "EmaParams::update",
                expected: self.values.len(),
                got: params.len(),
            });
        }
        let m = self.decay;
        for (e, &p) in self.values.iter_mut().zip(params) {
            *e = m * *e + (1.0 - m) * p;
        }
        Ok(())
    }
}

/// Spec-named wrapper over [`EmaParams::update`].
pub fn ema_update(ema: &mut EmaParams, params: &[f64]) -> Result<()> {
    ema.update(params)
}
